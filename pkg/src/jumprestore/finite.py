"""Exact linear algebra for finite state spaces under counting measure.

Everything here is dense numpy on n x n matrices (n is small), used as an
oracle for the samplers: MH kernel matrices, generators and adjoints, the
general killing rate, the restore generator, Dirichlet forms, the
large-step ordering check, asymptotic variances and spectral gaps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    InvalidInputError,
    KappaTooSmallError,
    PreconditionError,
    ReducibilityError,
)

ROW_TOL = 1e-12


def _square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {M.shape}")
    return M


def _check_stochastic(P, name="P"):
    P = _square(P, name)
    if np.any(P < -ROW_TOL) or np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_TOL:
        raise InvalidInputError(f"{name} is not row-stochastic")
    return P


def local_generator(P) -> np.ndarray:
    P = _check_stochastic(P)
    return P - np.eye(P.shape[0])


def adjoint(op, rho=None) -> np.ndarray:
    """Adjoint under counting measure, i.e. the transpose."""
    if rho is not None and not np.all(np.asarray(rho) == 1):
        raise InvalidInputError("only counting measure is supported")
    return np.asarray(op).T.copy()


def acceptance_matrix(Q, p) -> np.ndarray:
    """alpha(x, y) = min(1, p(y)Q(y,x) / (p(x)Q(x,y))), or 1 where p(x)Q(x,y) = 0."""
    Q = np.asarray(Q, dtype=float)
    p = np.asarray(p, dtype=float)
    fwd = p[:, None] * Q
    bwd = fwd.T
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fwd > 0, bwd / fwd, 1.0)
    return np.minimum(1.0, ratio)


def mh_kernel_matrix(Q, p):
    """(K, rejection): MH kernel with proposal matrix ``Q`` and rejection mass."""
    Q = _check_stochastic(Q, "Q")
    p = np.asarray(p, dtype=float)
    if p.shape != (Q.shape[0],) or np.any(p < 0):
        raise InvalidInputError("p_tilde must be a nonnegative vector matching Q")
    alpha = acceptance_matrix(Q, p)
    K = Q * alpha
    lost = Q * (1.0 - alpha)
    np.fill_diagonal(lost, 0.0)
    rejection = lost.sum(axis=1)
    np.fill_diagonal(K, np.diag(Q) + rejection)
    return K, rejection


def uniform_regeneration(n: int) -> np.ndarray:
    """Regeneration kernel whose every row is the uniform law."""
    return np.full((n, n), 1.0 / n)


def general_killing_rate(kappa0, mu_kernel, L, p, tol=1e-12) -> np.ndarray:
    """kappa = ((kappa0 mu^T + L^T) p) / p, infinite where p = 0."""
    if not kappa0 > 0:
        raise InvalidInputError("kappa0 must be positive")
    p = np.asarray(p, dtype=float)
    a = adjoint(_square(mu_kernel, "mu")) @ p
    b = adjoint(_square(L, "L")) @ p
    scale = tol * max(1.0, float(np.abs(p).max()))
    live = p > 0
    num = kappa0 * a + b
    bad = live & (num < -scale)
    if np.any(bad):
        with np.errstate(divide="ignore"):
            need = np.where(b < 0, -b / a, 0.0)
        kmin = float(np.max(need[live]))
        x = int(np.argmin(np.where(bad, num, np.inf)))
        raise KappaTooSmallError(
            f"killing rate negative at state {x}; kappa0 must be >= {kmin:.6g}", kmin, x)
    kappa = np.full(p.shape, np.inf)
    kappa[live] = np.maximum(num[live], 0.0) / p[live]
    return kappa


def simplified_killing_rate(kappa0, p, mu_tilde) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    mu_tilde = np.asarray(mu_tilde, dtype=float)
    kappa = np.full(p.shape, np.inf)
    live = p > 0
    kappa[live] = kappa0 * (p.sum() / mu_tilde.sum()) * mu_tilde[live] / p[live]
    return kappa


def restore_generator(L, kappa, mu_kernel) -> np.ndarray:
    L = _square(L, "L")
    M = _square(mu_kernel, "mu")
    kappa = np.asarray(kappa, dtype=float)
    if M.shape != L.shape or kappa.shape != (L.shape[0],):
        raise InvalidInputError("dimension mismatch between L, kappa and mu")
    if not np.all(np.isfinite(kappa)):
        raise InvalidInputError("remove states with infinite kappa before assembling")
    return L + kappa[:, None] * (M - np.eye(L.shape[0]))


def check_invariance(pi, A) -> float:
    pi = np.asarray(pi, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.shape != (pi.shape[0], pi.shape[0]):
        raise InvalidInputError("dimension mismatch")
    return float(np.max(np.abs(pi @ A)))


def dirichlet_form(A, pi, f) -> float:
    f = np.asarray(f, dtype=float)
    return -float(np.sum(np.asarray(pi) * f * (np.asarray(A) @ f)))


def _centered(pi, f):
    f = np.asarray(f, dtype=float)
    return f - float(pi @ f)


def asymptotic_variance(pi, f, K=None, A=None, cond_limit=1e12) -> float:
    """Asymptotic variance via the Poisson equation.

    Pass a transition matrix ``K`` for a discrete chain or a generator ``A``
    for a continuous-time process.
    """
    if (K is None) == (A is None):
        raise InvalidInputError("pass exactly one of K (discrete) or A (continuous)")
    pi = np.asarray(pi, dtype=float)
    ft = _centered(pi, f)
    n = pi.shape[0]
    one_pi = np.outer(np.ones(n), pi)
    if K is not None:
        M = np.eye(n) - np.asarray(K, dtype=float) + one_pi
        rhs = ft
    else:
        M = np.asarray(A, dtype=float) - one_pi
        rhs = -ft
    if np.linalg.cond(M) > cond_limit:
        raise ReducibilityError("Poisson system is singular; the chain is reducible")
    g = np.linalg.solve(M, rhs)
    if K is not None:
        return float(np.sum(pi * ft * (2.0 * g - ft)))
    return 2.0 * float(np.sum(pi * g * ft))


def spectral_gap(A, pi, tol=1e-10) -> float:
    """Infimum of E(f)/||f||^2 over centred f, via the pi-symmetrised generator."""
    A = np.asarray(A, dtype=float)
    pi = np.asarray(pi, dtype=float)
    scale = max(1.0, float(np.abs(A).max()))
    if check_invariance(pi, A) > tol * scale:
        raise PreconditionError("generator does not leave pi invariant")
    s = np.sqrt(pi)
    H = s[:, None] * A / s[None, :]
    H = -0.5 * (H + H.T)
    n = pi.shape[0]
    basis, _ = np.linalg.qr(np.column_stack([s, np.eye(n)]))
    C = basis[:, 1:n]
    return float(np.linalg.eigvalsh(C.T @ H @ C).min())


def sufficient_kappa0(p, lam) -> float:
    """A threshold on kappa0 that guarantees the ordering under counting measure.

    With uniform regeneration, lam * E_1(f) <= lam * n * max(pi) * Var_mu(f),
    and the restore jump part contributes kappa0 * Var_mu(f).
    """
    p = np.asarray(p, dtype=float)
    return float(lam * p.shape[0] * p.max() / p.sum())


def theorem_threshold(p, lam) -> float:
    """kappa0 >= lam / (2 Z) with Z the counting-measure normaliser."""
    return float(lam / (2.0 * np.asarray(p, dtype=float).sum()))


# -- instances ------------------------------------------------------------------


class InstanceFormatError(InvalidInputError):
    pass


@dataclass
class FiniteInstance:
    """A finite target with a symmetric small-step proposal and uniform regeneration."""

    Q: np.ndarray
    p_tilde: np.ndarray
    mu_tilde: np.ndarray
    lam: float = 0.3
    kappa0: float = 1.0
    kappa: Optional[np.ndarray] = None
    name: str = ""

    @property
    def n(self) -> int:
        return self.p_tilde.shape[0]

    @property
    def pi(self) -> np.ndarray:
        return self.p_tilde / self.p_tilde.sum()

    def reduced(self) -> "FiniteInstance":
        """Drop states with p~ = 0 and renormalise the proposal rows."""
        live = self.p_tilde > 0
        if live.all():
            return self
        Q = self.Q[np.ix_(live, live)].copy()
        Q[np.diag_indices_from(Q)] += 1.0 - Q.sum(axis=1)
        kappa = None if self.kappa is None else self.kappa[live]
        return FiniteInstance(Q, self.p_tilde[live], self.mu_tilde[live], self.lam,
                              self.kappa0, kappa, self.name)

    def to_dict(self) -> dict:
        d = {"n": self.n, "Q": self.Q.tolist(), "p_tilde": self.p_tilde.tolist(),
             "mu_tilde": self.mu_tilde.tolist(), "lambda": self.lam, "kappa0": self.kappa0}
        if self.kappa is not None:
            d["kappa"] = self.kappa.tolist()
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_dict(cls, d: dict, where: str = "instance") -> "FiniteInstance":
        if not isinstance(d, dict):
            raise InstanceFormatError(f"{where}: expected an object")
        mat_key = "P" if "P" in d and "Q" not in d else "Q"
        for key in ("n", mat_key, "p_tilde"):
            if key not in d:
                raise InstanceFormatError(f"{where}: missing field {key!r}")

        try:
            n = int(d["n"])
            Q = np.asarray(d[mat_key], dtype=float)
            p = np.asarray(d["p_tilde"], dtype=float)
            mu = np.asarray(d.get("mu_tilde", [1.0] * n), dtype=float)
            lam = float(d.get("lambda", 0.3))
            k0 = float(d.get("kappa0", 1.0))
            kappa = None if d.get("kappa") is None else np.asarray(d["kappa"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"{where}: {exc}") from None
        if Q.shape != (n, n):
            raise InstanceFormatError(f"{where}: field {mat_key!r} must be {n}x{n}")
        for key, v in (("p_tilde", p), ("mu_tilde", mu)):
            if v.shape != (n,):
                raise InstanceFormatError(f"{where}: field {key!r} must have length {n}")
        if kappa is not None and kappa.shape != (n,):
            raise InstanceFormatError(f"{where}: field 'kappa' must have length {n}")
        if np.any(Q < 0) or np.max(np.abs(Q.sum(1) - 1)) > 1e-9:
            raise InstanceFormatError(f"{where}: field {mat_key!r} is not row-stochastic")
        if np.any(p < 0) or not p.sum() > 0:
            raise InstanceFormatError(f"{where}: field 'p_tilde' must be >= 0 with positive sum")
        if not 0 <= lam <= 1:
            raise InstanceFormatError(f"{where}: field 'lambda' must lie in [0, 1]")
        return cls(Q, p, mu, lam, k0, kappa, str(d.get("name", "")))


def load_instances(path) -> list:
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    items = data.get("instances", data) if isinstance(data, dict) else data
    if isinstance(items, dict):
        items = [items]
    return [FiniteInstance.from_dict(d, f"{path}: instances[{i}]") for i, d in enumerate(items)]


def dump_instances(instances, path):
    with open(path, "w") as fh:
        json.dump({"instances": [i.to_dict() for i in instances]}, fh, indent=1)


def symmetric_proposal(n: int, rng) -> np.ndarray:
    """Symmetrise a random stochastic matrix, rescale, put the slack on the diagonal."""
    R = rng.uniform(size=(n, n))
    R /= R.sum(axis=1, keepdims=True)
    S = 0.5 * (R + R.T)
    S /= S.sum(axis=1).max()
    np.fill_diagonal(S, 0.0)
    np.fill_diagonal(S, 1.0 - S.sum(axis=1))
    return S


def random_instance(seed: int, n: Optional[int] = None, lam: float = 0.3, kappa0=None,
                    n_range=(2, 20)) -> FiniteInstance:
    """Seeded instance: p~ ~ U(0.1, 10), symmetric proposal, uniform mu~.

    ``kappa0`` defaults to the ordering threshold lam / (2 Z).
    """
    rng = np.random.default_rng(seed)
    if n is None:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
    p = rng.uniform(0.1, 10.0, size=n)
    Q = symmetric_proposal(n, rng)
    k0 = theorem_threshold(p, lam) if kappa0 is None else float(kappa0)
    return FiniteInstance(Q, p, np.ones(n), lam, k0, name=f"random-{seed}")


def two_state_fixture() -> FiniteInstance:
    """p~ = (2, 1), uniform mu~, Q with all entries 1/2, kappa0 = 1."""
    return FiniteInstance(np.full((2, 2), 0.5), np.array([2.0, 1.0]), np.ones(2), 0.3, 1.0,
                          name="two-state")


# -- assembled processes ---------------------------------------------------------


@dataclass
class RestoreSystem:
    pi: np.ndarray
    K0: np.ndarray
    L: np.ndarray
    kappa: np.ndarray
    M: np.ndarray
    A: np.ndarray


def build_restore(inst: FiniteInstance, kappa=None) -> RestoreSystem:
    """MH-adjusted small-step local dynamics plus the killing rate of ``inst``.

    The regeneration kernel is state-independent with law mu~ / sum(mu~).
    ``kappa`` (or ``inst.kappa``) overrides the general killing rate.
    """
    inst = inst.reduced()
    K0, _ = mh_kernel_matrix(inst.Q, inst.p_tilde)
    L = K0 - np.eye(inst.n)
    mu = inst.mu_tilde / inst.mu_tilde.sum()
    M = np.tile(mu, (inst.n, 1))
    if kappa is None:
        kappa = inst.kappa
    if kappa is None:
        kappa = general_killing_rate(inst.kappa0, M, L, inst.p_tilde)
    kappa = np.asarray(kappa, dtype=float)
    return RestoreSystem(inst.pi, K0, L, kappa, M, restore_generator(L, kappa, M))


def mixture_mh_kernel(inst: FiniteInstance, lam=None) -> np.ndarray:
    """MH kernel for the proposal lam * mu + (1 - lam) * Q."""
    lam = inst.lam if lam is None else lam
    inst = inst.reduced()
    mu = inst.mu_tilde / inst.mu_tilde.sum()
    Q_lam = lam * np.tile(mu, (inst.n, 1)) + (1.0 - lam) * inst.Q
    return mh_kernel_matrix(Q_lam, inst.p_tilde)[0]


@dataclass
class OrderingReport:
    """Outcome of comparing E (restore) with E_lam (mixture MH) on random f.

    ``min_difference`` is min over f of E(f) - E_lam(f). The ``chain`` entries
    give, per f, the successive lower bounds of the argument that compares the
    two forms; ``step_violations`` counts the f for which a claimed inequality
    between consecutive entries fails by more than ``tol``.
    """

    min_difference: float
    differences: np.ndarray
    hypothesis_holds: bool
    kappa0: float
    threshold: float
    chain: dict = field(default_factory=dict)
    step_violations: dict = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return self.min_difference < -1e-12


def theorem_ordering_check(inst: FiniteInstance, lam=None, kappa0=None, n_f: int = 20,
                           seed: int = 0, exploratory: bool = False, tol: float = 1e-12,
                           fs=None) -> OrderingReport:
    """Compare the restore Dirichlet form with that of the mixture MH chain.

    Both use the MH-adjusted small step ``inst.Q`` as local dynamics, uniform
    regeneration/large steps and the simplified killing rate with ``kappa0``.
    The hypothesis kappa0 >= lam / (2 Z) is enforced unless ``exploratory``.
    """
    inst = inst.reduced()
    lam = inst.lam if lam is None else float(lam)
    kappa0 = inst.kappa0 if kappa0 is None else float(kappa0)
    p = inst.p_tilde
    Z = float(p.sum())
    n = inst.n
    thr = lam / (2.0 * Z)
    holds = kappa0 >= thr * (1.0 - 1e-15)
    if not holds and not exploratory:
        raise PreconditionError(f"kappa0 = {kappa0:.6g} is below lam / (2 Z) = {thr:.6g}")
    pi = inst.pi
    mu = inst.mu_tilde / inst.mu_tilde.sum()
    K_lam = mixture_mh_kernel(inst, lam)
    A_lam = K_lam - np.eye(n)
    kappa = simplified_killing_rate(kappa0, p, inst.mu_tilde)
    K0, _ = mh_kernel_matrix(inst.Q, p)
    M = np.tile(mu, (n, 1))
    A = restore_generator(K0 - np.eye(n), kappa, M)
    K1, _ = mh_kernel_matrix(M, p)
    alpha1 = acceptance_matrix(M, p)
    if fs is None:
        rng = np.random.default_rng(seed)
        fs = rng.standard_normal((n_f, n))
    fs = np.array([_centered(pi, f) for f in np.atleast_2d(fs)])

    diffs, d_lower, g_bound, rho_bound, final = [], [], [], [], []
    for f in fs:
        E = dirichlet_form(A, pi, f)
        E_lam = dirichlet_form(A_lam, pi, f)
        E1 = dirichlet_form(K1 - np.eye(n), pi, f)
        var_mu = float(mu @ f**2 - (mu @ f) ** 2)
        sq = (f[:, None] - f[None, :]) ** 2
        diffs.append(E - E_lam)
        d_lower.append(kappa0 * var_mu - lam * E1)
        # lam E_1 written as (lam/2) sum pi(x) mu(y) alpha(x,y) |f(x)-f(y)|^2
        g_bound.append(kappa0 * var_mu - 0.5 * lam * float(np.sum(pi[:, None] * mu[None, :] * alpha1 * sq)))
        rho_bound.append(kappa0 * var_mu - lam / (2.0 * Z) * float(np.sum(mu[None, :] * sq)))
        final.append((kappa0 - thr) * float(mu @ sq @ mu) + (mu @ f) ** 2 - float(mu @ f**2))
    diffs = np.array(diffs)
    chain = {"difference": diffs, "drop_E0": np.array(d_lower), "acceptance_form": np.array(g_bound),
             "reference_bound": np.array(rho_bound), "final_line": np.array(final)}
    steps = {
        "difference>=drop_E0": int(np.sum(diffs < chain["drop_E0"] - tol)),
        "drop_E0==acceptance_form": int(np.sum(np.abs(chain["drop_E0"] - chain["acceptance_form"]) > 1e-9)),
        "acceptance_form>=reference_bound": int(np.sum(chain["acceptance_form"] < chain["reference_bound"] - tol)),
        "reference_bound==final_line": int(np.sum(np.abs(chain["reference_bound"] - chain["final_line"]) > 1e-9)),
        "final_line>=0": int(np.sum(chain["final_line"] < -tol)),
    }
    return OrderingReport(float(diffs.min()), diffs, bool(holds), kappa0, thr, chain, steps)


def fixture_path(name: str = "two_state") -> str:
    """Path of a bundled instance file (``two_state`` or ``two_state_perturbed``)."""
    from importlib.resources import files

    return str(files("jumprestore") / "fixtures" / f"{name}.json")
