"""Dense multilinear tensors with variance and symmetry metadata.

A :class:`MultiTensor` stores its coordinates as an ``n x n x ... x n`` numpy
array, one axis per index, with ``variance[i]`` telling whether axis ``i`` is
an upper (contravariant, ``"u"``) or lower (covariant, ``"l"``) index.  Values
are treated as immutable; every operation returns a new tensor.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateForm, InvalidContraction, InvalidIndexGroup
from .multiindex import orbit_ids

DEFAULT_COND_BOUND = 1e12


@dataclass(frozen=True, eq=False)
class MultiTensor:
    entries: np.ndarray
    variance: tuple
    sym_groups: tuple = field(default=())

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        variance = tuple(self.variance)
        if any(v not in ("u", "l") for v in variance):
            raise ValueError(f"variance entries must be 'u' or 'l', got {variance}")
        if entries.ndim != len(variance):
            raise ValueError(f"{entries.ndim}-dimensional entries for {len(variance)} indices")
        if entries.ndim and len(set(entries.shape)) != 1:
            raise ValueError(f"all axes must share the dimension, got shape {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "variance", variance)
        object.__setattr__(self, "sym_groups",
                           tuple(tuple(sorted(g)) for g in self.sym_groups))

    @classmethod
    def from_array(cls, array, upper, lower, sym_groups=()):
        """Tensor with ``upper`` leading upper indices then ``lower`` lower ones."""
        return cls(np.asarray(array, dtype=float), ("u",) * upper + ("l",) * lower,
                   sym_groups)

    @classmethod
    def zeros(cls, n, upper, lower):
        return cls.from_array(np.zeros((n,) * (upper + lower)), upper, lower)

    @property
    def dim(self):
        return self.entries.shape[0] if self.entries.ndim else 0

    @property
    def rank(self):
        return self.entries.ndim

    @property
    def upper_rank(self):
        return self.variance.count("u")

    @property
    def lower_rank(self):
        return self.variance.count("l")

    def __add__(self, other):
        _check_same_shape(self, other)
        return MultiTensor(self.entries + other.entries, self.variance,
                           _common_groups(self, other))

    def __sub__(self, other):
        _check_same_shape(self, other)
        return MultiTensor(self.entries - other.entries, self.variance,
                           _common_groups(self, other))

    def __mul__(self, scalar):
        return MultiTensor(self.entries * float(scalar), self.variance, self.sym_groups)

    __rmul__ = __mul__

    def __repr__(self):
        return (f"MultiTensor(dim={self.dim}, variance={''.join(self.variance)}, "
                f"sym_groups={self.sym_groups})")


def _check_same_shape(a, b):
    if a.variance != b.variance or a.entries.shape != b.entries.shape:
        raise InvalidContraction("tensors do not share index structure")


def _common_groups(a, b):
    return tuple(g for g in a.sym_groups if g in b.sym_groups)


@dataclass(frozen=True, eq=False)
class Bilinear:
    """An n x n coefficient matrix of a (not necessarily symmetric) form."""

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"bilinear form needs a square matrix, got {entries.shape}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self):
        return self.entries.shape[0]

    def as_tensor(self, variance=("l", "l")):
        return MultiTensor(self.entries, variance)


def sup_norm(t):
    """Largest absolute coordinate; accepts tensors, forms or plain arrays."""
    a = t.entries if isinstance(t, (MultiTensor, Bilinear)) else np.asarray(t)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a)))


def orbit_average(a, k):
    """Average ``a`` over all permutations of its last ``k`` axes.

    Each permutation orbit of an index sequence is averaged in one pass
    (scatter-add over the orbit labels), so the cost is linear in the number
    of entries instead of ``k!`` times it.  Orbits whose entries already agree
    exactly are left untouched, which makes the operation exactly idempotent.
    """
    a = np.asarray(a, dtype=float)
    if k <= 1:
        return a.copy()
    n = a.shape[-1]
    lead = a.shape[:a.ndim - k]
    flat = a.reshape(-1, n**k)
    ids, _ = orbit_ids(n, k)
    n_orbits = int(ids.max()) + 1
    rows = flat.shape[0]
    label = (np.arange(rows)[:, None] * n_orbits + ids[None, :]).ravel()
    vals = flat.ravel()
    total = np.bincount(label, weights=vals, minlength=rows * n_orbits)
    size = np.bincount(ids, minlength=n_orbits).astype(float)
    mean = (total.reshape(rows, n_orbits) / size)[:, ids]
    hi = np.full(rows * n_orbits, -np.inf)
    lo = np.full(rows * n_orbits, np.inf)
    np.maximum.at(hi, label, vals)
    np.minimum.at(lo, label, vals)
    constant = (hi == lo).reshape(rows, n_orbits)[:, ids]
    out = np.where(constant, flat, mean)
    return out.reshape(lead + (n,) * k)


def symmetrize(t, group):
    """Average ``t`` over all permutations of the axes listed in ``group``."""
    group = tuple(sorted(set(group)))
    if not group:
        return t
    if any(g < 0 or g >= t.rank for g in group):
        raise InvalidIndexGroup(f"group {group} out of range for rank {t.rank}")
    if len({t.variance[g] for g in group}) != 1:
        raise InvalidIndexGroup(f"group {group} mixes upper and lower indices")
    rest = [i for i in range(t.rank) if i not in group]
    moved = np.moveaxis(t.entries, group, range(len(rest), t.rank))
    averaged = orbit_average(moved, len(group))
    back = np.moveaxis(averaged, range(len(rest), t.rank), group)
    groups = [g for g in t.sym_groups if not set(g) <= set(group)]
    groups.append(group)
    return MultiTensor(back, t.variance, tuple(groups))


def is_symmetric(t, group):
    """Exact check that ``t`` is invariant under permutations of ``group``."""
    group = tuple(group)
    if len(group) < 2:
        return True
    base = t.entries
    axes = list(range(t.rank))
    for i, j in zip(group, group[1:]):
        perm = axes.copy()
        perm[i], perm[j] = perm[j], perm[i]
        if not np.array_equal(base, np.transpose(base, perm)):
            return False
    return True


_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def contract(t, s, pairs):
    """Einstein contraction of ``t`` and ``s`` over ``pairs``.

    Each pair ``(i, j)`` joins axis ``i`` of ``t`` with axis ``j`` of ``s``;
    one must be upper and the other lower.  Free axes keep their order, those
    of ``t`` first.
    """
    if t.dim != s.dim and t.rank and s.rank:
        raise InvalidContraction(f"dimension mismatch {t.dim} vs {s.dim}")
    if t.rank + s.rank > len(_LETTERS):
        raise InvalidContraction("too many indices")
    t_sub = list(_LETTERS[:t.rank])
    s_sub = list(_LETTERS[t.rank:t.rank + s.rank])
    used_t, used_s = set(), set()
    for i, j in pairs:
        if not (0 <= i < t.rank and 0 <= j < s.rank):
            raise InvalidContraction(f"pair {(i, j)} out of range")
        if i in used_t or j in used_s:
            raise InvalidContraction(f"index reused in pair {(i, j)}")
        if t.variance[i] == s.variance[j]:
            raise InvalidContraction(
                f"pair {(i, j)} joins two '{t.variance[i]}' indices")
        used_t.add(i)
        used_s.add(j)
        s_sub[j] = t_sub[i]
    free_t = [i for i in range(t.rank) if i not in used_t]
    free_s = [j for j in range(s.rank) if j not in used_s]
    out_sub = "".join(t_sub[i] for i in free_t) + "".join(s_sub[j] for j in free_s)
    spec = f"{''.join(t_sub)},{''.join(s_sub)}->{out_sub}"
    entries = np.einsum(spec, t.entries, s.entries)
    variance = tuple(t.variance[i] for i in free_t) + tuple(s.variance[j] for j in free_s)
    return MultiTensor(entries, variance)


def invert_bilinear(u, cond_bound=DEFAULT_COND_BOUND):
    """Inverse of a form; raises :class:`DegenerateForm` when ill-conditioned."""
    a = u.entries if isinstance(u, Bilinear) else np.asarray(u, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DegenerateForm(f"not a square form: shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DegenerateForm("form has non-finite entries")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > cond_bound:
        raise DegenerateForm(f"condition number {cond:.3e} exceeds {cond_bound:.1e}",
                             cond=cond)
    return Bilinear(np.linalg.inv(a))

