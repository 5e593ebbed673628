"""K2 transform: map a reference basis in L2(F_gamma) into an orthonormal
basis in L2(G_beta) whose score residuals have the reference means and
covariances.

Two routes are provided. The function-level helpers (``isometry_l``,
``reflect_K``, ``build_c``, ``build_tilde_c``, ``apply_Up``) act on plain
callables and compute every inner product by quadrature. ``K2Basis`` works
in coefficient space: every function the construction produces lies in the
span of the atoms ``[1, l, l*phi_1..l*phi_M, l*a_1..l*a_p, b_1..b_p]``, so
each reflection is a rank-one update of a coefficient matrix and pointwise
evaluation needs only the atom values and cached scalars.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, LegendreBasis
from .exceptions import ParameterError, SpanDegeneracyError, SupportMismatchError
from .models.base import orthonormal_score
from .numerics import DEFAULT_NODES, DEFAULT_PANELS, legendre_matrix, split_rule, weighted_gram

DEGENERATE = 1e-10
SPAN_TOL = 1e-8
_CACHE_SIZE = 64
_cache: OrderedDict = OrderedDict()


def shared_rule(target, reference, panels=DEFAULT_PANELS, nodes_per_panel=DEFAULT_NODES):
    """One quadrature rule on the common support, split at both models' kinks."""
    if target.support != reference.support:
        raise SupportMismatchError(
            f"supports differ: target {target.support} vs reference {reference.support}"
        )
    if not target.finite_support:
        raise SupportMismatchError("the K2 construction needs a bounded support")
    kinks = set(target.breakpoints) | set(reference.breakpoints)
    return split_rule(*target.support, kinks, panels, nodes_per_panel)


def _check_target_density(target, rule):
    g = target.pdf(rule.nodes)
    if np.any(g < 1e-300):
        i = int(np.argmin(g))
        raise SupportMismatchError(
            f"target density vanishes at x={rule.nodes[i]!r} inside the shared support"
        )


# -- function-level route ------------------------------------------------------

def isometry_l(target, reference):
    """``x -> sqrt(f_gamma(x) / g_beta(x))``."""
    if target.support != reference.support:
        raise SupportMismatchError(
            f"supports differ: target {target.support} vs reference {reference.support}"
        )

    def l(x):
        x = np.asarray(x, dtype=float)
        g = target.pdf(x)
        if np.any(g < 1e-300):
            raise SupportMismatchError("target density vanishes where l is evaluated")
        return np.sqrt(reference.pdf(x) / g)

    return l


def _one(x):
    return np.ones_like(np.asarray(x, dtype=float))


def reflection(u, v, target, rule):
    """Operator swapping unit vectors ``u`` and ``v`` in L2(G); identity when
    ``1 - <u, v>`` falls below the degeneracy threshold."""
    x = rule.nodes
    w = rule.weights * target.pdf(x)
    ux, vx = u(x), v(x)
    denom = 1.0 - float(w @ (ux * vx))

    def op(phi):
        if denom < DEGENERATE:
            return phi
        coef = float(w @ ((ux - vx) * phi(x))) / denom

        def reflected(t):
            return phi(t) - (u(t) - v(t)) * coef

        return reflected

    op.denom = denom
    return op


def reflect_K(phi, l, target, rule):
    """``K phi = phi - (l - 1) <l - 1, phi> / (1 - <l, 1>)``."""
    return reflection(l, _one, target, rule)(phi)


def _mul(l, f):
    return lambda t: l(t) * f(t)


def build_c(K, l, a_ext):
    """``c_k = K(l a_k)`` for each reference score function ``a_k``."""
    return [K(_mul(l, a)) for a in a_ext]


def build_tilde_c(c, b, target, rule):
    """Orthogonalized chain ``c~_k`` and the reflections ``U_{b_k c~_k}``."""
    if len(c) != len(b):
        raise ParameterError("c and b must have equal length")
    tilde, chain = [], []
    for k, ck in enumerate(c):
        f = ck
        for op in chain:
            f = op(f)
        tilde.append(f)
        chain.append(reflection(b[k], f, target, rule))
    return tilde, chain


def apply_Up(chain, phi):
    """Apply ``U_{b_1 c~_1}`` first and ``U_{b_p c~_p}`` last."""
    for op in chain:
        phi = op(phi)
    return phi


def _columns(fn):
    """Split a vector-valued callable into per-column callables."""
    def col(k):
        return lambda t: fn(np.atleast_1d(t))[:, k]
    return col


def extend_score(reference, q, p, donor_basis, rule=None, a=None):
    """Complete ``q`` orthonormal reference scores to ``p`` by Gram-Schmidt of
    donor functions against ``1`` and the existing scores under F.

    ``donor_basis`` is a sequence of callables tried in order; a donor whose
    residual norm falls under the span tolerance raises
    :class:`SpanDegeneracyError` unless ``skip_degenerate`` handling is done by
    the caller. Returns a list of ``p - q`` callables.
    """
    if q >= p:
        return []
    rule = rule or reference.quadrature_rule()
    x = rule.nodes
    w = rule.weights * reference.pdf(x)
    if a is None:
        a = orthonormal_score(reference, rule)
    cols = [np.ones_like(x)] + [a(x)[:, k] for k in range(q)]
    funcs = [_one] + [_columns(a)(k) for k in range(q)]
    coefs = []
    for donor in donor_basis:
        if len(coefs) == p - q:
            break
        d = donor(x)
        proj = [float(w @ (d * c)) for c in cols]
        r = d - sum(pk * c for pk, c in zip(proj, cols))
        norm = np.sqrt(float(w @ (r * r)))
        if norm < SPAN_TOL:
            raise SpanDegeneracyError("donor function lies in the span of 1 and the scores")
        coefs.append((donor, list(funcs), proj, norm))
        cols.append(r / norm)

        def new(t, donor=donor, fs=list(funcs), pr=proj, nm=norm):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return (donor(t) - sum(pk * fk(t) for pk, fk in zip(pr, fs))) / nm

        funcs.append(new)
    if len(coefs) < p - q:
        raise SpanDegeneracyError(f"only {len(coefs)} of {p - q} donors supplied")
    return funcs[1 + q:]


# -- coefficient-space route -------------------------------------------------

@dataclass(frozen=True)
class Reflection:
    """``f -> f - d <d, f> / denom`` in atom coordinates, or the identity."""

    direction: np.ndarray
    denom: float
    label: str = ""

    @property
    def identity(self):
        return self.denom < DEGENERATE

    def apply(self, coef, W):
        if self.identity:
            return coef
        proj = (self.direction @ W @ coef) / self.denom
        if coef.ndim == 1:
            return coef - self.direction * proj
        return coef - np.outer(self.direction, proj)


@dataclass(frozen=True)
class ReflectionChain:
    steps: tuple
    inner: dict = field(default_factory=dict)

    def apply(self, coef, W):
        for s in self.steps:
            coef = s.apply(coef, W)
        return coef


def _householder(u, v, W, label):
    # for unit u, v: 1 - <u, v> = |u - v|^2 / 2, and the right-hand side
    # keeps full relative precision when u and v nearly coincide
    d = u - v
    return Reflection(d, 0.5 * float(d @ W @ d), label)


class K2Basis(BasisSet):
    """K2-transformed basis ``h_j = U_p K (l phi_j)`` for a target model.

    ``phi_j`` are the normalized shifted Legendre polynomials composed with
    the reference CDF; ``a`` is the reference orthonormal score, extended by
    Gram-Schmidt of ``phi_{M+1}, phi_{M+2}, ...`` when the reference has
    fewer parameters than the target.
    """

    kind = "k2"

    def __init__(self, target, reference, size, rule=None):
        rule = rule or shared_rule(target, reference)
        super().__init__(target, size, rule)
        self.target, self.reference = target, reference
        p, q = target.param_dim, reference.param_dim
        if q > p:
            raise ParameterError(
                f"reference has more free parameters ({q}) than the target ({p})"
            )
        _check_target_density(target, rule)
        self.p, self.q = p, q
        x = rule.nodes
        wF = rule.weights * reference.pdf(x)
        wG = rule.weights * target.pdf(x)

        self.a_score = orthonormal_score(reference, rule)
        self._extra = []
        if q < p:
            donors = (self._legendre_donor(j) for j in range(size + 1, size + 1 + 8 * p))
            self._extra = _extend_robust(reference, q, p, donors, rule, self.a_score)
        self.b_score = orthonormal_score(target, rule)

        # reference side: phi, a and the residual basis under F
        self.reference_basis = LegendreBasis(reference, size, rule, score=self.a_ext)
        self.phi_a = self.reference_basis.score_coef  # <a_k, phi_j>_F, (p, M)

        # atoms and their Gram matrix under G
        M = size
        self._sl = {
            "one": 0, "l": 1,
            "lphi": slice(2, 2 + M),
            "la": slice(2 + M, 2 + M + p),
            "b": slice(2 + M + p, 2 + M + 2 * p),
        }
        self.n_atoms = 2 + M + 2 * p
        A = self.atoms(x)
        self.W = weighted_gram(A, A, wG)
        self.W = 0.5 * (self.W + self.W.T)
        self._wF = wF

        e = np.eye(self.n_atoms)
        one, lvec = e[0], e[1]
        lphi = e[:, self._sl["lphi"]]
        la = e[:, self._sl["la"]]
        bvec = e[:, self._sl["b"]]
        W = self.W

        l_one = float(lvec @ W @ one)
        self.bhattacharyya = l_one
        self.K = _householder(lvec, one, W, "K")
        c = self.K.apply(la, W)
        steps, tilde = [], []
        for k in range(p):
            ck = c[:, k]
            for s in steps:
                ck = s.apply(ck, W)
            tilde.append(ck)
            steps.append(_householder(bvec[:, k], ck, W, f"U{k + 1}"))
        self.c = c
        self.c_tilde = np.column_stack(tilde) if tilde else np.zeros((self.n_atoms, 0))
        self.Up = ReflectionChain(tuple(steps))
        self.chain = ReflectionChain((self.K,) + tuple(steps),
                                     {"<l,1>": l_one,
                                      "denoms": [s.denom for s in steps]})

        self.H = self.Up.apply(self.K.apply(lphi, W), W)
        lphi_tilde = lphi - la @ self.phi_a
        self.H_tilde = self.Up.apply(self.K.apply(lphi_tilde, W), W)
        self._finalize()

    # -- reference helpers ------------------------------------------------
    def _legendre_donor(self, j):
        ref = self.reference
        return lambda t: legendre_matrix(ref.cdf(np.atleast_1d(t)), j, start=j)[:, 0]

    def a_ext(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        a = self.a_score(x)
        if not self._extra:
            return a
        return np.column_stack([a] + [f(x) for f in self._extra])

    def l(self, x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(self.reference.pdf(x) / self.target.pdf(x))

    # -- evaluation -------------------------------------------------------
    def atoms(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        l = self.l(x)[:, None]
        phi = self.reference_basis.raw(x)
        return np.hstack([np.ones((x.size, 1)), l, l * phi, l * self.a_ext(x),
                          self.b_score(x)])

    def raw(self, x):
        return self.atoms(x) @ self.H

    def residual(self, x):
        return self.atoms(x) @ self.H_tilde

    # -- diagnostics ------------------------------------------------------
    def identity_residuals(self, n_random=4, seed=0):
        """Maximum residual of every operator identity the construction relies on."""
        W, x = self.W, self.rule.nodes
        A = self.atoms(x)
        e = np.eye(self.n_atoms)
        one, lvec = e[:, 0], e[:, 1]
        bvec = e[:, self._sl["b"]]
        rng = np.random.default_rng(seed)
        probes = np.column_stack([one, lvec, e[:, self._sl["lphi"]], bvec,
                                  rng.standard_normal((self.n_atoms, n_random))])
        Kp = self.K.apply(probes, W)
        Up = self.Up.apply(probes, W)

        def grid(c1, c2):
            return float(np.max(np.abs(A @ (c1 - c2)), initial=0.0))

        def gram_err(P, Q):
            return float(np.max(np.abs(P.T @ W @ P - Q.T @ W @ Q), initial=0.0))

        G_res = self.gram
        F_res = self.reference_basis.gram
        G_raw = self.H.T @ W @ self.H
        out = {
            "K_unitary": gram_err(Kp, probes),
            "K_self_adjoint": float(np.max(np.abs(Kp.T @ W @ probes - probes.T @ W @ Kp))),
            "K_involution": grid(self.K.apply(Kp, W), probes),
            "K_l_equals_1": grid(self.K.apply(lvec, W), one),
            "K_1_equals_l": grid(self.K.apply(one, W), lvec),
            "Up_unitary": gram_err(Up, probes),
            "Up_1_equals_1": grid(self.Up.apply(one, W), one),
            "Up_c_equals_b": grid(self.Up.apply(self.c, W), bvec) if self.p else 0.0,
            "c_orthonormal": float(np.max(np.abs(self.c.T @ W @ self.c - np.eye(self.p)),
                                          initial=0.0)),
            "c_mean_zero": float(np.max(np.abs(one @ W @ self.c), initial=0.0)),
            "c_tilde_mean_zero": float(np.max(np.abs(one @ W @ self.c_tilde), initial=0.0)),
            "c_tilde_orthogonal_b": max(
                [abs(float(bvec[:, j] @ W @ self.c_tilde[:, k]))
                 for k in range(self.p) for j in range(k)] or [0.0]),
            "h_orthonormal": float(np.max(np.abs(G_raw - np.eye(self.size)))),
            "h_tilde_mean_zero": float(np.max(np.abs(self.mean))),
            "covariance_transfer": float(np.max(np.abs(G_res - F_res))),
            "score_transfer": float(np.max(np.abs(bvec.T @ W @ self.H - self.phi_a),
                                           initial=0.0)),
            "residual_of_image": grid(self.H_tilde,
                                      self.H - bvec @ (bvec.T @ W @ self.H)),
        }
        return out


def _extend_robust(reference, q, p, donors, rule, a):
    """``extend_score`` that skips donors lying in the existing span."""
    chosen = []
    for d in donors:
        try:
            extend_score(reference, q, q + len(chosen) + 1, chosen + [d], rule, a)
        except SpanDegeneracyError:
            continue
        chosen.append(d)
        if len(chosen) == p - q:
            break
    return extend_score(reference, q, p, chosen, rule, a)


def k2_basis(target, reference, M, rule=None):
    """Build (or fetch from the parameter-keyed cache) the K2 basis."""
    key = None
    if rule is None:
        key = (target.model_hash, reference.model_hash, int(M))
        hit = _cache.get(key)
        if hit is not None:
            _cache.move_to_end(key)
            return hit
    basis = K2Basis(target, reference, M, rule)
    if key is not None:
        _cache[key] = basis
        if len(_cache) > _CACHE_SIZE:
            _cache.popitem(last=False)
    return basis
