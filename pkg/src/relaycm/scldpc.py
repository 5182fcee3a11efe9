"""Terminated spatially coupled LDPC codes over circulant lifts.

The base graph is the all-ones dv x dc matrix, coupled over a window of
width w: the edge of base row r and base column c is delayed by a
spreading index in [0, w), so a variable at position tau checks into
positions tau .. tau+w-1.  Each position carries dc circulant blocks of
size Q; a block with offset d maps variable lane q to check lane
(q + d) mod Q, i.e. acts as np.roll(eye(Q), d, axis=0).

Encoding is systematic by construction.  The last dv base columns are
parity: column j has an identity-lift edge with spreading 0 into base
row j, so interior parity blocks follow from a forward recursion.  The
final w-1 positions cannot be completed that way; there the parity
blocks and the last dv info columns are solved jointly against all
remaining checks.  That square system is rank deficient by exactly dv-1
(summing all its rows of one base-row class gives the all-ones vector,
for every class), which is also why the code keeps dv-1 more degrees of
freedom than the encoder uses: the free variables are pinned to zero so
the map stays linear.  Offsets that leave a larger deficiency are
rejected and redrawn.

Decoding is a sliding-window sum-product pass that decides one position
per step, folding already-decided positions into the check parities.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError

DEFAULT_DV = 3
DEFAULT_DC = 15
_MAX_BUILD_ATTEMPTS = 20
_PHI_FLOOR = 1e-12


def design_rate(chain_len: int, coupling: int, dv: int = DEFAULT_DV, dc: int = DEFAULT_DC) -> float:
    """Rate after termination: 1 - (dv/dc)(L+w-1)/L."""
    return 1.0 - (dv / dc) * (chain_len + coupling - 1) / chain_len


def _spread_index(r: int, c: int, w: int, dv: int, dc: int) -> int:
    if c >= dc - dv:
        # parity column j: identity anchor at row j, every other edge one
        # position later.  Deeper parity delays make the termination
        # system fall apart into structurally singular blocks.
        return 0 if r == c - (dc - dv) else 1
    return (r + c) % w


def _greedy_offsets(q, w, dv, dc, rng):
    """Circulant offsets avoiding lifted 4-cycles where possible.

    Two columns close a 4-cycle through a row pair iff both their
    spreading differences and their offset differences agree, so the
    tracker keys on (row pair, spreading difference).  Parity anchor
    edges keep offset 0 and still count.  Returns (offsets, violations).
    """
    offsets = np.zeros((dv, dc), dtype=np.int64)
    seen = {}
    violations = 0
    assigned = [[False] * dc for _ in range(dv)]

    def diffs(r, c, val):
        out = []
        for r2 in range(dv):
            if r2 == r or not assigned[r2][c]:
                continue
            a, b = (r, r2) if r < r2 else (r2, r)
            da = _spread_index(a, c, w, dv, dc) - _spread_index(b, c, w, dv, dc)
            v = val if a == r else offsets[a, c]
            v2 = offsets[b, c] if a == r else val
            out.append(((a, b, da), (v - v2) % q))
        return out
    for c in range(dc):
        for r in range(dv):
            if c >= dc - dv and r == c - (dc - dv):
                cand = [0]
            else:
                cand = list(rng.permutation(q))
            chosen = None
            for v in cand:
                if all(d not in seen.get(key, ()) for key, d in diffs(r, c, v)):
                    chosen = v
                    break
            if chosen is None:
                chosen = cand[0]
                violations += 1
            offsets[r, c] = chosen
            assigned[r][c] = True
            for key, d in diffs(r, c, chosen):
                seen.setdefault(key, set()).add(d)
    return offsets, violations


def _gf2_solver(m: np.ndarray):
    """Row reduce m over GF(2), returning (transform, pivot_cols, rank)
    with transform @ m in reduced echelon form."""
    n_rows, n_cols = m.shape
    a = (m % 2).astype(np.uint8)
    t = np.eye(n_rows, dtype=np.uint8)
    pivots = []
    r = 0
    for col in range(n_cols):
        rows = np.flatnonzero(a[r:, col]) + r
        if len(rows) == 0:
            continue
        if rows[0] != r:
            a[[r, rows[0]]] = a[[rows[0], r]]
            t[[r, rows[0]]] = t[[rows[0], r]]
        hit = np.flatnonzero(a[:, col])
        hit = hit[hit != r]
        a[hit] ^= a[r]
        t[hit] ^= t[r]
        pivots.append(col)
        r += 1
        if r == n_rows:
            break
    return t, np.array(pivots, dtype=np.int64), r


class SpatiallyCoupledCode:
    """One built code instance; use build_code to construct."""

    def __init__(self, q, chain_len, coupling, dv, dc, offsets, girth,
                 edge_var, edge_check, check_ptr, tail_solver):
        self.q = q
        self.chain_len = chain_len
        self.coupling = coupling
        self.dv = dv
        self.dc = dc
        self.offsets = offsets
        self.girth = girth
        self.n = dc * q * chain_len
        self.n_checks = dv * q * (chain_len + coupling - 1)
        self.k = q * ((dc - dv) * chain_len - dv * (coupling - 1))
        self.rate = self.k / self.n
        self._edge_var = edge_var        # sorted by check id
        self._edge_check = edge_check
        self._check_ptr = check_ptr
        self._tail_transform, self._tail_pivots, self._tail_rank = tail_solver
        self.info_vars = self._info_vars()
        self.tail_vars = self._tail_vars()

    def _info_vars(self):
        q, dc, dv, L, w = self.q, self.dc, self.dv, self.chain_len, self.coupling
        parts = []
        for tau in range(L):
            n_info = dc - dv if tau <= L - w else dc - 2 * dv
            base = tau * dc * q
            parts.append(np.arange(base, base + n_info * q))
        return np.concatenate(parts)

    def _tail_vars(self):
        q, dc, dv, L, w = self.q, self.dc, self.dv, self.chain_len, self.coupling
        parts = []
        for tau in range(L - w + 1, L):
            base = (tau * dc + dc - 2 * dv) * q
            parts.append(np.arange(base, base + 2 * dv * q))
        return np.concatenate(parts) if parts else np.array([], dtype=np.int64)

    def _class_syndrome(self, x, cls, n_lanes):
        """Parity per check lane over one contiguous run of check ids."""
        lo = self._check_ptr[cls * self.q]
        hi = self._check_ptr[cls * self.q + n_lanes]
        lanes = self._edge_check[lo:hi] - cls * self.q
        s = np.bincount(lanes, weights=x[self._edge_var[lo:hi]], minlength=n_lanes)
        return s.astype(np.int64) % 2

    def encode(self, u) -> np.ndarray:
        """Systematic encoding of k info bits into an n-bit codeword."""
        u = np.asarray(u, dtype=np.uint8).ravel()
        if len(u) != self.k:
            raise ConfigError(f"expected {self.k} info bits, got {len(u)}")
        q, dc, dv, L, w = self.q, self.dc, self.dv, self.chain_len, self.coupling
        x = np.zeros(self.n, dtype=np.uint8)
        x[self.info_vars] = u & 1
        for t in range(L - w + 1):
            for r in range(dv):
                syn = self._class_syndrome(x, t * dv + r, q)
                base = (t * dc + dc - dv + r) * q
                x[base:base + q] = syn
        n_tail = 6 * (w - 1) * q
        cls0 = (L - w + 1) * dv
        rhs = self._class_syndrome(x, cls0, n_tail)
        y = (self._tail_transform.astype(np.int64) @ rhs) % 2
        if np.any(y[self._tail_rank:]):
            raise RuntimeError("termination system inconsistent; corrupted build")
        xt = np.zeros(n_tail, dtype=np.uint8)
        xt[self._tail_pivots] = y[:self._tail_rank]
        x[self.tail_vars] = xt
        return x

    def syndrome(self, x) -> np.ndarray:
        """All check parities of a word."""
        x = np.asarray(x, dtype=np.uint8)
        s = np.bincount(self._edge_check, weights=x[self._edge_var].astype(np.float64),
                        minlength=self.n_checks)
        return s.astype(np.int64) % 2

    def h_sparse(self) -> sp.csr_matrix:
        """Parity check matrix as scipy sparse CSR, entries in {0, 1}."""
        data = np.ones(len(self._edge_var), dtype=np.uint8)
        return sp.csr_matrix(
            (data, (self._edge_check, self._edge_var)),
            shape=(self.n_checks, self.n),
        )

    def to_alist(self) -> str:
        """Standard alist text: dimensions, max degrees, per-node degree
        lists, then 1-based neighbor lists padded with zeros."""
        h = self.h_sparse().tocsc()
        col_deg = np.diff(h.indptr)
        hr = h.tocsr()
        row_deg = np.diff(hr.indptr)
        dmax_c, dmax_r = col_deg.max(), row_deg.max()
        lines = [
            f"{self.n} {self.n_checks}",
            f"{dmax_c} {dmax_r}",
            " ".join(str(d) for d in col_deg),
            " ".join(str(d) for d in row_deg),
        ]
        for j in range(self.n):
            nbr = (h.indices[h.indptr[j]:h.indptr[j + 1]] + 1).tolist()
            lines.append(" ".join(str(v) for v in nbr + [0] * (dmax_c - len(nbr))))
        for i in range(self.n_checks):
            nbr = (hr.indices[hr.indptr[i]:hr.indptr[i + 1]] + 1).tolist()
            lines.append(" ".join(str(v) for v in nbr + [0] * (dmax_r - len(nbr))))
        return "\n".join(lines) + "\n"


def _build_edges(q, chain_len, coupling, dv, dc, offsets):
    lanes = np.arange(q)
    var_ids, chk_ids = [], []
    for tau in range(chain_len):
        for c in range(dc):
            for r in range(dv):
                t = tau + _spread_index(r, c, coupling, dv, dc)
                off = offsets[r, c]
                var_ids.append((tau * dc + c) * q + lanes)
                chk_ids.append((t * dv + r) * q + (lanes + off) % q)
    var_ids = np.concatenate(var_ids)
    chk_ids = np.concatenate(chk_ids)
    order = np.argsort(chk_ids, kind="stable")
    edge_var = var_ids[order]
    edge_check = chk_ids[order]
    n_checks = dv * q * (chain_len + coupling - 1)
    ptr = np.zeros(n_checks + 1, dtype=np.int64)
    np.cumsum(np.bincount(edge_check, minlength=n_checks), out=ptr[1:])
    return edge_var, edge_check, ptr


def _tail_system(q, chain_len, coupling, dv, dc, edge_var, edge_check, check_ptr):
    L, w = chain_len, coupling
    n_tail = 6 * (w - 1) * q
    chk0 = (L - w + 1) * dv * q
    lo = check_ptr[(L - w + 1) * dv]
    ev = edge_var[lo:]
    ec = edge_check[lo:]
    tau = ev // (dc * q)
    c = (ev // q) % dc
    unknown = (tau >= L - w + 1) & (c >= dc - 2 * dv)
    rows = ec[unknown] - chk0
    base = (tau[unknown] - (L - w + 1)) * 2 * dv * q
    cols = base + ev[unknown] - (tau[unknown] * dc + dc - 2 * dv) * q
    m = np.zeros((n_tail, n_tail), dtype=np.uint8)
    np.add.at(m, (rows, cols), 1)
    m %= 2
    return m


def build_code(q: int, chain_len: int, coupling: int, seed: int = 0,
               dv: int = DEFAULT_DV, dc: int = DEFAULT_DC) -> SpatiallyCoupledCode:
    """Construct a terminated coupled code.

    Parameters are the lift size Q, chain length L, and coupling width w.
    Powers of two for Q give the offset search the most room.  The build
    redraws offsets until the termination system has the minimal rank
    deficiency dv-1; a failure after many attempts raises.
    """
    if q < 2 or chain_len < 2 or coupling < 2:
        raise ConfigError("need q >= 2, chain length >= 2, coupling >= 2")
    if coupling > chain_len:
        raise ConfigError("coupling width cannot exceed the chain length")
    if coupling > dv:
        raise ConfigError("coupling width cannot exceed the variable degree")
    if dc < 2 * dv:
        raise ConfigError("need dc >= 2*dv for the terminated layout")
    for attempt in range(_MAX_BUILD_ATTEMPTS):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        offsets, violations = _greedy_offsets(q, coupling, dv, dc, rng)
        edge_var, edge_check, check_ptr = _build_edges(q, chain_len, coupling, dv, dc, offsets)
        m = _tail_system(q, chain_len, coupling, dv, dc, edge_var, edge_check, check_ptr)
        transform, pivots, rank = _gf2_solver(m)
        if m.shape[0] - rank == dv - 1:
            return SpatiallyCoupledCode(
                q, chain_len, coupling, dv, dc, offsets,
                girth=4 if violations else 6,
                edge_var=edge_var, edge_check=edge_check, check_ptr=check_ptr,
                tail_solver=(transform, pivots, rank),
            )
    raise RuntimeError(
        f"no workable termination after {_MAX_BUILD_ATTEMPTS} offset draws"
    )


class DecodeResult:
    """Hard output word plus per-position convergence flags."""

    def __init__(self, bits, converged, iterations):
        self.bits = bits
        self.converged = converged
        self.iterations = iterations

    def info_bits(self, code: SpatiallyCoupledCode) -> np.ndarray:
        return self.bits[code.info_vars]


def _phi(x):
    # involution -ln tanh(x/2); floor keeps it finite at both ends
    return -np.log(np.tanh(np.maximum(x, _PHI_FLOOR) / 2.0))


def decode(code: SpatiallyCoupledCode, llrs, window: int | None = None,
           iterations: int = 20, saturation: float = 25.0) -> DecodeResult:
    """Sliding-window sum-product decoding of one codeword.

    llrs follow the positive-means-zero convention.  The window spans
    `window` positions (default 4w); each step runs up to `iterations`
    full parallel iterations, stops early once the in-window checks are
    satisfied, then commits the oldest position.  A position's flag
    reports whether every check touching it holds for the final word and
    its committed posteriors were all nonzero.
    """
    L, w, q, dv, dc = code.chain_len, code.coupling, code.q, code.dv, code.dc
    win = 4 * w if window is None else int(window)
    if win < w:
        raise ConfigError("window must span at least the coupling width")
    lam = np.asarray(llrs, dtype=np.float64).ravel()
    if len(lam) != code.n:
        raise ConfigError(f"expected {code.n} LLRs, got {len(lam)}")
    hard = np.zeros(code.n, dtype=np.uint8)
    min_abs = np.full(L, np.inf)
    total_iter = 0
    for t0 in range(L):
        c_hi = min(t0 + win, L + w - 1)
        chk0, chk1 = t0 * dv * q, c_hi * dv * q
        lo, hi = code._check_ptr[chk0], code._check_ptr[chk1]
        evar = code._edge_var[lo:hi]
        echk = code._edge_check[lo:hi] - chk0
        n_chk = chk1 - chk0
        frozen = (evar // (dc * q)) < t0
        flip = np.bincount(echk[frozen], weights=hard[evar[frozen]].astype(np.float64),
                           minlength=n_chk).astype(np.int64) % 2
        avar = evar[~frozen]
        achk = echk[~frozen]
        uvar, inv = np.unique(avar, return_inverse=True)
        lam_u = lam[uvar]
        c2v = np.zeros(len(avar))
        post = lam_u.copy()
        for _ in range(iterations):
            total_iter += 1
            v2c = np.clip(post[inv] - c2v, -saturation, saturation)
            neg = v2c < 0.0
            ph = _phi(np.abs(v2c))
            mag = _phi(np.bincount(achk, weights=ph, minlength=n_chk)[achk] - ph)
            n_neg = np.bincount(achk, weights=neg, minlength=n_chk).astype(np.int64)
            par = (n_neg[achk] - neg + flip[achk]) % 2
            c2v = np.where(par == 0, mag, -mag)
            post = lam_u + np.bincount(inv, weights=c2v, minlength=len(uvar))
            hb = (post < 0.0).astype(np.float64)
            syn = np.bincount(achk, weights=hb[inv], minlength=n_chk).astype(np.int64) + flip
            if not np.any(syn % 2):
                break
        sel = (uvar // (dc * q)) == t0
        hard[uvar[sel]] = post[sel] < 0.0
        min_abs[t0] = np.abs(post[sel]).min()
    syn = code.syndrome(hard)
    clean = syn.reshape(L + w - 1, dv * q).sum(axis=1) == 0
    flags = np.empty(L, dtype=bool)
    for t in range(L):
        flags[t] = bool(clean[t:min(t + w, L + w - 1)].all()) and min_abs[t] > 0.0
    return DecodeResult(bits=hard, converged=flags, iterations=total_iter)
