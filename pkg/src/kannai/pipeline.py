"""End-to-end Kannai LCU pipeline: assembly, projection, oracle comparison and query accounting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import bounds
from .dilation import DilationHamiltonian, hermitian_dilation
from .errors import (BoundViolation, DegenerateOutput, InvalidPrecision, InvalidTime,
                     PlanMismatch, ShapeError)
from .operators import DiscreteFactor, ForcingVector, Slot, TimeProfile
from .propagator import perturbed_evolve, spectral_filter
from .quadrature import (LcuCoefficients, QuadraturePlan, build_panel_grid,
                         build_trapezoid_grid, coefficients, select_parameters)
from .reference import SemigroupOracle

PRE_RUN_EPS = 1e-2


@dataclass(frozen=True)
class TheoremGL:
    """Panel Gauss-Legendre with parameters chosen from the error theorem."""


@dataclass(frozen=True)
class Trapezoid:
    R: float
    M: int


Rule = Union[TheoremGL, Trapezoid]


@dataclass(frozen=True, eq=False)
class SimulationProblem:
    factor: DiscreteFactor
    u0: np.ndarray
    forcing: Optional[ForcingVector] = None
    T: float = 1.0
    eps: float = 1e-6

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=complex).ravel()
        if u0.shape[0] != self.factor.n_w:
            raise ShapeError(f"u0 has length {u0.shape[0]}, factor expects {self.factor.n_w}")
        object.__setattr__(self, "u0", u0)
        if self.forcing is not None and self.forcing.values.shape[0] != self.dim:
            raise ShapeError(f"forcing has length {self.forcing.values.shape[0]}, "
                             f"stacked layout has {self.dim}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidTime(f"T must be positive, got {self.T}")
        if not (0 < self.eps < 1):
            raise InvalidPrecision(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def dim(self) -> int:
        return self.factor.n_w + self.factor.n_v

    @property
    def psi0(self) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[: self.factor.n_w] = self.u0
        return psi

    @property
    def b(self) -> np.ndarray:
        if self.forcing is None:
            return np.zeros(self.dim, dtype=complex)
        return np.asarray(self.forcing.values)

    @property
    def time_profile(self) -> TimeProfile:
        return TimeProfile.LinearInS if self.forcing is None else self.forcing.time_profile

    def effective_source(self) -> np.ndarray:
        """The w-space source f with u' = -Au + f equivalent to the stacked forcing."""
        nw = self.factor.n_w
        if self.forcing is None:
            return np.zeros(nw, dtype=complex)
        b = self.b
        fv = self.forcing
        if fv.slot == Slot.WSlot and fv.time_profile == TimeProfile.LinearInS:
            if np.any(b[nw:] != 0):
                raise ShapeError("w-slot forcing has nonzero v components")
            return b[:nw].copy()
        if fv.slot == Slot.VSlot and fv.time_profile == TimeProfile.ConstantInS:
            if np.any(b[:nw] != 0):
                raise ShapeError("v-slot forcing has nonzero w components")
            return self.factor.matrix.conj().T @ b[nw:]
        raise ShapeError(f"unsupported forcing combination {fv.slot.name}/{fv.time_profile.name}")

    def reference(self) -> np.ndarray:
        return SemigroupOracle.from_matrix(self.factor.A).solve(self.u0, self.effective_source(), self.T)


@dataclass(frozen=True)
class QueryCount:
    per_sel: int
    repetitions: int
    total_matrix_queries: int
    state_prep_calls: int
    alpha_H: float
    s_max: float
    delta1: float


def query_count(alpha_H: float, s_max: float, delta1: float, g: int, n_prep: int = 1,
                sel_constant: float = 1.0, log_constant: float = 1.0) -> QueryCount:
    """per_sel = ceil(c1 alpha_H s_max) + ceil(c2 log2(1/delta1)); total = per_sel g."""
    if not 0 < delta1 < 1:
        raise InvalidPrecision(f"delta1 must lie in (0, 1), got {delta1}")
    per_sel = math.ceil(sel_constant * alpha_H * s_max) + math.ceil(log_constant * math.log2(1.0 / delta1))
    g = int(g)
    return QueryCount(per_sel, g, per_sel * g, g * n_prep, float(alpha_H), float(s_max), float(delta1))


@dataclass(frozen=True, eq=False)
class SimulationReport:
    u_f: np.ndarray
    u_h: np.ndarray
    u_ref: np.ndarray
    rel_error: float
    u_r: float
    eta0: float
    g: int
    queries: QueryCount
    plan: QuadraturePlan
    coeffs: LcuCoefficients
    u_f_perturbed: Optional[np.ndarray] = None

    @property
    def abs_error(self) -> float:
        return float(np.linalg.norm(self.u_h - self.u_ref))

    def summary(self) -> dict:
        q = self.queries
        return {
            "rel_error": self.rel_error,
            "u_r": self.u_r,
            "eta0": self.eta0,
            "g": self.g,
            "per_sel": q.per_sel,
            "total_queries": q.total_matrix_queries,
            "state_prep_calls": q.state_prep_calls,
            "R": self.plan.R,
            "M": self.plan.M,
            "Q": self.plan.Q,
            "alpha_c": self.coeffs.alpha_c,
            "alpha_d": self.coeffs.alpha_d,
            "delta1": q.delta1,
        }

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_index", "u_kannai_re", "u_kannai_im", "u_ref_re", "u_ref_im", "abs_err"])
        for i, (a, r) in enumerate(zip(self.u_h, self.u_ref)):
            w.writerow([i, repr(float(a.real)), repr(float(a.imag)), repr(float(r.real)),
                        repr(float(r.imag)), repr(float(abs(a - r)))])


def _check_consistent(problem: SimulationProblem, plan: QuadraturePlan, coeffs: LcuCoefficients):
    if coeffs.c.shape[0] != plan.M or coeffs.d.shape[0] != plan.M:
        raise PlanMismatch(f"{coeffs.c.shape[0]} coefficients for {plan.M} nodes")
    if not math.isclose(coeffs.T, problem.T, rel_tol=1e-14):
        raise PlanMismatch(f"coefficients built for T={coeffs.T}, problem has T={problem.T}")
    if problem.forcing is not None and np.any(problem.b != 0) \
            and coeffs.time_profile != problem.time_profile:
        raise PlanMismatch("coefficients built for a different forcing time profile")


def assemble(problem: SimulationProblem, plan: QuadraturePlan, coeffs: LcuCoefficients,
             delta1: Optional[float] = None, seed=None,
             dil: Optional[DilationHamiltonian] = None) -> np.ndarray:
    """u_f = sum_j (c_j U(s_j) psi0 + d_j U(s_j) b); perturbed unitaries when delta1 is set."""
    _check_consistent(problem, plan, coeffs)
    if dil is None:
        dil = hermitian_dilation(problem.factor)
    if dil.dim != problem.dim:
        raise ShapeError("dilation does not match the problem layout")
    psi0, b = problem.psi0, problem.b
    if not delta1:
        V = dil.eigenvectors
        a = V.conj().T @ psi0
        bb = V.conj().T @ b
        fc = spectral_filter(dil.eigenvalues, plan.nodes, coeffs.c)
        fd = spectral_filter(dil.eigenvalues, plan.nodes, coeffs.d) if np.any(bb) else 0.0
        return V @ (fc * a + fd * bb)
    if seed is None:
        raise ValueError("a seed is required for perturbed assembly")
    terms = np.empty((plan.M, dil.dim), dtype=complex)
    for j, s in enumerate(plan.nodes):
        v = coeffs.c[j] * psi0 + coeffs.d[j] * b
        terms[j] = perturbed_evolve(dil, s, v, delta1, seed, counter=j).vector
    return _pairwise_sum(terms)


def _pairwise_sum(rows: np.ndarray) -> np.ndarray:
    while rows.shape[0] > 1:
        if rows.shape[0] % 2:
            rows = np.vstack([rows, np.zeros((1, rows.shape[1]), dtype=rows.dtype)])
        rows = rows[0::2] + rows[1::2]
    return rows[0]


def project_physical(u_f, problem: SimulationProblem) -> np.ndarray:
    u_f = np.asarray(u_f).ravel()
    if u_f.shape[0] != problem.dim:
        raise ShapeError(f"vector has length {u_f.shape[0]}, stacked layout has {problem.dim}")
    return u_f[: problem.factor.n_w].copy()


def _plan_for(problem: SimulationProblem, rule: Rule, normH: float, u_r_est: float) -> QuadraturePlan:
    if isinstance(rule, Trapezoid):
        return build_trapezoid_grid(rule.R, rule.M)
    eps_sel = problem.eps / (8.0 * u_r_est)
    p = select_parameters(problem.T, normH, eps_sel)
    return build_panel_grid(p.R, p.h1, p.Q)


def estimate_u_r(problem: SimulationProblem, dil: DilationHamiltonian) -> float:
    """Cheap trapezoid pre-run at eps = 1e-2 to estimate (|u0| + T|b|)/|u_h|."""
    normH = dil.norm
    p = select_parameters(problem.T, normH, PRE_RUN_EPS)
    M = 2 * max(1, math.ceil(2.0 * p.R / p.h1_raw))
    plan = build_trapezoid_grid(p.R, M)
    co = coefficients(plan, problem.T, problem.time_profile)
    u_h = project_physical(assemble(problem, plan, co, dil=dil), problem)
    nu = np.linalg.norm(u_h)
    if nu == 0:
        raise DegenerateOutput("pre-run produced a zero output")
    return float((np.linalg.norm(problem.u0) + problem.T * np.linalg.norm(problem.b)) / nu)


def run(problem: SimulationProblem, rule: Rule = TheoremGL(), perturb_seed=None,
        dil: Optional[DilationHamiltonian] = None, u_ref: Optional[np.ndarray] = None,
        sel_constant: float = 1.0, log_constant: float = 1.0) -> SimulationReport:
    if dil is None:
        dil = hermitian_dilation(problem.factor)
    if u_ref is None:
        u_ref = problem.reference()
    u0n = float(np.linalg.norm(problem.u0))
    bn = float(np.linalg.norm(problem.b))
    if u0n == 0 and bn == 0:
        raise DegenerateOutput("zero initial data and forcing give a zero output")
    u_r_est = estimate_u_r(problem, dil) if isinstance(rule, TheoremGL) else 1.0
    plan = _plan_for(problem, rule, dil.norm, u_r_est)
    co = coefficients(plan, problem.T, problem.time_profile)
    u_f = assemble(problem, plan, co, dil=dil)
    u_h = project_physical(u_f, problem)
    nh = float(np.linalg.norm(u_h))
    if nh == 0:
        raise DegenerateOutput("projected output is zero")
    ref_n = float(np.linalg.norm(u_ref))
    err = float(np.linalg.norm(u_h - u_ref))
    rel = err / ref_n if ref_n > 0 else err
    u_r = (u0n + problem.T * bn) / nh
    eta0 = co.alpha_c * u0n + co.alpha_d * bn
    g = max(1, math.ceil(eta0 / nh))
    if g * nh < eta0:
        g += 1
    delta1 = min(0.5, problem.eps / (8.0 * u_r))
    n_prep = 1 + (bn > 0)
    q = query_count(dil.norm, plan.s_max, delta1, g, n_prep, sel_constant, log_constant)
    u_fa = None
    if perturb_seed is not None:
        u_fa = assemble(problem, plan, co, delta1=delta1, seed=perturb_seed, dil=dil)
    return SimulationReport(u_f, u_h, u_ref, rel, float(u_r), float(eta0), int(g), q, plan, co, u_fa)


@dataclass
class BudgetReport:
    hom_error: float
    hom_bound: float
    inh_error: float
    inh_bound: float
    lcu_error: float
    lcu_bound: float
    atol: float
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.hom_error <= self.hom_bound + self.atol
                and self.inh_error <= self.inh_bound + self.atol
                and self.lcu_error <= self.lcu_bound + self.atol)


def error_budget_check(problem: SimulationProblem, delta_off: float, delta1: float,
                       R: Optional[float] = None, h1: Optional[float] = None,
                       Q: Optional[int] = None, seed: int = 0, mode: str = "random",
                       noise_scale: float = 1.0, raise_on_violation: bool = True) -> BudgetReport:
    """Compare injected-noise assembly against the composed truncation, quadrature,
    coefficient-noise and LCU-noise bounds.

    noise_scale > 1 injects kernel noise larger than the declared delta_off,
    which is the deliberate violation scenario.
    """
    dil = hermitian_dilation(problem.factor)
    T = problem.T
    normH = dil.norm
    if R is None or h1 is None or Q is None:
        p = select_parameters(T, normH, problem.eps)
        R = p.R if R is None else R
        h1 = p.h1 if h1 is None else h1
        Q = p.Q if Q is None else Q
    plan = build_panel_grid(R, h1, Q)
    profile = problem.time_profile
    clean = coefficients(plan, T, profile)
    noisy = coefficients(plan, T, profile, delta_off * noise_scale, seed, mode)
    V = dil.eigenvectors
    lam = dil.eigenvalues
    a = V.conj().T @ problem.psi0
    bb = V.conj().T @ problem.b
    I1 = V @ (bounds.kappa_transform(T, lam) * a)
    I2 = V @ (bounds.lambda_transform(T, lam, profile) * bb)
    I1h = V @ (spectral_filter(lam, plan.nodes, noisy.c) * a)
    I2h = V @ (spectral_filter(lam, plan.nodes, noisy.d) * bb)
    psi_n = float(np.linalg.norm(problem.psi0))
    b_n = float(np.linalg.norm(problem.b))
    ksum = clean.alpha_c
    lsum = clean.alpha_d
    hom_bound = bounds.total_bound_c(T, plan.R, plan.h1, Q, normH, delta_off, ksum) * psi_n
    if profile == TimeProfile.LinearInS:
        inh_bound = bounds.total_bound_d(T, plan.R, plan.h1, Q, normH, delta_off, lsum) * b_n
    else:
        inh_bound = float("inf") if b_n > 0 else 0.0
    hom_err = float(np.linalg.norm(I1h - I1))
    inh_err = float(np.linalg.norm(I2h - I2))
    u_fh = I1h + I2h
    lcu_err = 0.0
    lcu_bound = 0.0
    if delta1:
        u_fa = assemble(problem, plan, noisy, delta1=delta1, seed=seed, dil=dil)
        lcu_err = float(np.linalg.norm(u_fa - u_fh))
        lcu_bound = bounds.lcu_noise_bound(delta1, noisy.alpha_c, noisy.alpha_d, psi_n, b_n)
    atol = 1e-13 * (psi_n + T * b_n) * max(1.0, math.sqrt(plan.M) * 1e-2)
    rep = BudgetReport(hom_err, hom_bound, inh_err, inh_bound, lcu_err, lcu_bound, atol,
                       {"R": plan.R, "h1": plan.h1, "Q": Q, "M": plan.M,
                        "alpha_c": noisy.alpha_c, "alpha_d": noisy.alpha_d})
    if raise_on_violation and not rep.ok:
        raise BoundViolation(
            f"hom {hom_err:.3e} vs {hom_bound:.3e}, inh {inh_err:.3e} vs {inh_bound:.3e}, "
            f"lcu {lcu_err:.3e} vs {lcu_bound:.3e}")
    return rep


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float
    atol: float

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound + self.atol


def bound_inequality_checks(factor: DiscreteFactor, u0, f, T: float, R: float, h1: float, Q: int,
                          delta_off: float = 0.0, seed: int = 0, noise_scale: float = 1.0,
                          mode: str = "random") -> list:
    """Truncation, quadrature, coefficient-sum and total-error inequalities for one setting.

    The exact and truncated transforms come from closed forms built on the
    Faddeeva function, independent of the panel rule.
    """
    dil = hermitian_dilation(factor)
    lam, V = dil.eigenvalues, dil.eigenvectors
    normH = dil.norm
    plan = build_panel_grid(R, h1, Q)
    R, h1 = plan.R, plan.h1
    psi0 = np.zeros(dil.dim, dtype=complex)
    psi0[: factor.n_w] = u0
    b = np.zeros(dil.dim, dtype=complex)
    b[: factor.n_w] = f
    a = V.conj().T @ psi0
    bb = V.conj().T @ b
    pn, bn = float(np.linalg.norm(psi0)), float(np.linalg.norm(b))
    clean = coefficients(plan, T)
    noisy = coefficients(plan, T, TimeProfile.LinearInS, delta_off * noise_scale, seed, mode)
    I1 = V @ (bounds.kappa_transform(T, lam) * a)
    I2 = V @ (bounds.lambda_transform(T, lam) * bb)
    I1t = V @ (bounds.truncated_kappa_transform(T, R, lam) * a)
    I2t = V @ (bounds.truncated_lambda_transform(T, R, lam) * bb)
    I1h = V @ (spectral_filter(lam, plan.nodes, clean.c) * a)
    I2h = V @ (spectral_filter(lam, plan.nodes, clean.d) * bb)
    I1a = V @ (spectral_filter(lam, plan.nodes, noisy.c) * a)
    I2a = V @ (spectral_filter(lam, plan.nodes, noisy.d) * bb)
    atol = 1e-14 * max(1.0, pn + T * bn) * max(1.0, math.sqrt(plan.M))
    nrm = lambda v: float(np.linalg.norm(v))
    return [
        BoundCheck("truncation_c", nrm(I1 - I1t), bounds.truncation_bound_c(T, R) * pn, atol),
        BoundCheck("truncation_d", nrm(I2 - I2t), bounds.truncation_bound_d(T, R) * bn, atol),
        BoundCheck("quadrature_c", nrm(I1h - I1t), bounds.quadrature_bound_c(T, R, h1, Q, normH) * pn, atol),
        BoundCheck("quadrature_d", nrm(I2h - I2t), bounds.quadrature_bound_d(T, R, h1, Q, normH) * bn, atol),
        BoundCheck("coefficients_c", noisy.alpha_c, bounds.coefficient_bound_c(T, R, h1, Q, delta_off), 1e-14),
        BoundCheck("coefficients_d", noisy.alpha_d, bounds.coefficient_bound_d(T, R, h1, Q, delta_off), 1e-14),
        BoundCheck("total_c", nrm(I1a - I1),
                   bounds.total_bound_c(T, R, h1, Q, normH, delta_off, clean.alpha_c) * pn, atol),
        BoundCheck("total_d", nrm(I2a - I2),
                   bounds.total_bound_d(T, R, h1, Q, normH, delta_off, clean.alpha_d) * bn, atol),
    ]
