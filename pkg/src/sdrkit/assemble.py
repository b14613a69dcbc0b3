"""Two-stage lexicographic assembly of desirability-matched GFC inventories.

Stage 1 minimizes the worst within-pair desirability gap (bisection over the
sorted candidate gap values, each step a depth-first feasibility search).
Stage 2 minimizes total squared desirability mismatch among selections whose
maximum gap stays within ``m* + epsilon``, via branch and bound. Both stages
are exact; ties are broken by lexicographic candidate id order so results are
reproducible without an external MIP solver.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .core import (
    AssemblyConfig,
    GfcBlock,
    Inventory,
    ItemPool,
    SdrkitError,
    TRAIT_LABELS,
)


class InfeasibleError(SdrkitError):
    def __init__(self, message: str, family: str):
        super().__init__(f"{message} (constraint family: {family})")
        self.family = family


class BudgetExhaustedError(SdrkitError):
    pass


class InstanceTooLargeError(SdrkitError):
    pass


TRAIT_PAIRS: tuple[tuple[int, int], ...] = tuple(
    (a, b) for a in range(5) for b in range(a + 1, 5)
)
_PAIR_INDEX = {p: i for i, p in enumerate(TRAIT_PAIRS)}


@dataclass(frozen=True)
class CandidatePair:
    left: str
    right: str
    gap: float
    sq: float  # (s_left - s_right)^2, kept at full precision
    mixed_key: bool
    left_trait: int
    right_trait: int
    left_key: int
    right_key: int

    @property
    def trait_pair(self) -> tuple[str, str]:
        a, b = sorted((self.left_trait, self.right_trait))
        return (TRAIT_LABELS[a], TRAIT_LABELS[b])

    @property
    def pair_group(self) -> int:
        a, b = sorted((self.left_trait, self.right_trait))
        return _PAIR_INDEX[(a, b)]


@dataclass(frozen=True)
class AssemblySolution:
    inventory: Inventory
    m_star: float
    sse: float
    proof: str  # "optimal" or "budget-exhausted-best-known"

    @property
    def max_gap(self) -> float:
        return max(b.desirability_gap for b in self.inventory.blocks)


def enumerate_candidates(pool: ItemPool) -> list[CandidatePair]:
    """All cross-domain unordered pairs, in lexicographic id order."""
    unrated = [it.id for it in pool if it.desirability is None]
    if unrated:
        raise SdrkitError(f"unrated items in pool: {unrated[:5]}")
    items = sorted(pool.items, key=lambda it: it.id)
    out: list[CandidatePair] = []
    for i, a in enumerate(items):
        for b in items[i + 1 :]:
            if a.domain == b.domain:
                continue
            out.append(
                CandidatePair(
                    left=a.id,
                    right=b.id,
                    gap=abs(a.desirability - b.desirability),
                    sq=(a.desirability - b.desirability) ** 2,
                    mixed_key=a.keying != b.keying,
                    left_trait=a.domain.index,
                    right_trait=b.domain.index,
                    left_key=a.keying,
                    right_key=b.keying,
                )
            )
    return out


def _check_selection(sel: tuple[CandidatePair, ...], cfg: AssemblyConfig) -> bool:
    if len(sel) != cfg.block_count:
        return False
    used: set[str] = set()
    trait_counts = [0] * 5
    pair_counts = [0] * 10
    plus = [0] * 5
    minus = [0] * 5
    mixed = 0
    for c in sel:
        if c.left in used or c.right in used:
            return False
        used.add(c.left)
        used.add(c.right)
        trait_counts[c.left_trait] += 1
        trait_counts[c.right_trait] += 1
        pair_counts[c.pair_group] += 1
        mixed += c.mixed_key
        for t, k in ((c.left_trait, c.left_key), (c.right_trait, c.right_key)):
            (plus if k > 0 else minus)[t] += 1
    if cfg.per_trait is not None and any(n != cfg.per_trait for n in trait_counts):
        return False
    if cfg.per_trait_pair is not None and any(n != cfg.per_trait_pair for n in pair_counts):
        return False
    if cfg.mixed_key_range is not None:
        lo, hi = cfg.mixed_key_range
        if not (lo <= mixed <= hi):
            return False
    if cfg.sign_floor is not None:
        for t in range(5):
            total = plus[t] + minus[t]
            if total and (
                plus[t] < cfg.sign_floor * total - 1e-12
                or minus[t] < cfg.sign_floor * total - 1e-12
            ):
                return False
    return True


class _Search:
    """Depth-first search over candidates in id order with constraint pruning."""

    def __init__(self, cands: list[CandidatePair], cfg: AssemblyConfig):
        self.cands = cands
        self.cfg = cfg
        self.n = len(cands)
        p = cfg.block_count
        # suffix availability counts, index i covers candidates i..n-1
        self.suf_total = [0] * (self.n + 1)
        self.suf_pair = [[0] * 10 for _ in range(self.n + 1)]
        self.suf_mixed = [0] * (self.n + 1)
        self.suf_plus = [[0] * 5 for _ in range(self.n + 1)]
        self.suf_min_sq_pair = [[math.inf] * 10 for _ in range(self.n + 1)]
        self.suf_min_sq = [math.inf] * (self.n + 1)
        for i in range(self.n - 1, -1, -1):
            c = cands[i]
            self.suf_total[i] = self.suf_total[i + 1] + 1
            self.suf_pair[i] = list(self.suf_pair[i + 1])
            self.suf_pair[i][c.pair_group] += 1
            self.suf_mixed[i] = self.suf_mixed[i + 1] + c.mixed_key
            self.suf_plus[i] = list(self.suf_plus[i + 1])
            for t, k in ((c.left_trait, c.left_key), (c.right_trait, c.right_key)):
                if k > 0:
                    self.suf_plus[i][t] += 1
            self.suf_min_sq_pair[i] = list(self.suf_min_sq_pair[i + 1])
            self.suf_min_sq_pair[i][c.pair_group] = min(
                self.suf_min_sq_pair[i][c.pair_group], c.sq
            )
            self.suf_min_sq[i] = min(self.suf_min_sq[i + 1], c.sq)
        self.p = p
        self.nodes = 0
        self.budget = cfg.node_budget
        self.budget_hit = False

    # minimum positive-key count required per trait at the final selection
    def _plus_bounds(self, total_t: int) -> tuple[int, int]:
        floor = self.cfg.sign_floor
        lo = math.ceil(floor * total_t - 1e-12)
        hi = total_t - lo
        return lo, hi

    def search(self, best_sse: float | None = None, find_all_best: bool = False):
        """Run the DFS.

        With ``best_sse is None`` this is a pure feasibility search returning
        the first feasible selection (or None). Otherwise it is a branch and
        bound on total squared mismatch, returning the optimal selection.
        """
        cfg = self.cfg
        optimize = best_sse is not None
        best: list[CandidatePair] | None = None
        best_val = math.inf if optimize else None
        sel: list[CandidatePair] = []
        used: set[str] = set()
        trait_counts = [0] * 5
        pair_counts = [0] * 10
        plus = [0] * 5
        state = {"mixed": 0, "sse": 0.0}

        def feasible_here(i: int) -> bool:
            need = self.p - len(sel)
            if self.suf_total[i] < need:
                return False
            if cfg.per_trait_pair is not None:
                for g in range(10):
                    if pair_counts[g] > cfg.per_trait_pair:
                        return False
                    if pair_counts[g] + self.suf_pair[i][g] < cfg.per_trait_pair:
                        return False
            if cfg.per_trait is not None:
                for t in range(5):
                    if trait_counts[t] > cfg.per_trait:
                        return False
            if cfg.mixed_key_range is not None:
                lo, hi = cfg.mixed_key_range
                if state["mixed"] > hi:
                    return False
                if state["mixed"] + min(need, self.suf_mixed[i]) < lo:
                    return False
            if cfg.sign_floor is not None and cfg.per_trait is not None:
                for t in range(5):
                    plo, phi = self._plus_bounds(cfg.per_trait)
                    # remaining positive-key slots for t cannot exceed what is left
                    if plus[t] > phi:
                        return False
                    if plus[t] + self.suf_plus[i][t] < plo:
                        return False
            return True

        def sse_lower_bound(i: int) -> float:
            bound = state["sse"]
            if cfg.per_trait_pair is not None:
                for g in range(10):
                    need_g = cfg.per_trait_pair - pair_counts[g]
                    if need_g > 0:
                        bound += need_g * self.suf_min_sq_pair[i][g]
            else:
                bound += (self.p - len(sel)) * self.suf_min_sq[i]
            return bound

        def leaf_ok() -> bool:
            if cfg.per_trait is not None and any(
                n != cfg.per_trait for n in trait_counts
            ):
                return False
            if cfg.per_trait_pair is not None and any(
                n != cfg.per_trait_pair for n in pair_counts
            ):
                return False
            if cfg.mixed_key_range is not None:
                lo, hi = cfg.mixed_key_range
                if not (lo <= state["mixed"] <= hi):
                    return False
            if cfg.sign_floor is not None:
                for t in range(5):
                    total = trait_counts[t] * 1  # one slot per appearance
                    n_plus = plus[t]
                    n_minus = total - n_plus
                    if total and (
                        n_plus < cfg.sign_floor * total - 1e-12
                        or n_minus < cfg.sign_floor * total - 1e-12
                    ):
                        return False
            return True

        def dfs(i: int) -> bool:
            nonlocal best, best_val
            self.nodes += 1
            if self.budget is not None and self.nodes > self.budget:
                self.budget_hit = True
                return True  # unwind
            if len(sel) == self.p:
                if leaf_ok():
                    if not optimize:
                        best = list(sel)
                        return True
                    if state["sse"] < best_val - 1e-15:
                        best = list(sel)
                        best_val = state["sse"]
                return False
            if not feasible_here(i):
                return False
            if optimize and sse_lower_bound(i) >= best_val - 1e-15:
                return False
            for j in range(i, self.n):
                c = self.cands[j]
                if self.suf_total[j] < self.p - len(sel):
                    break
                if c.left in used or c.right in used:
                    continue
                if cfg.per_trait_pair is not None and (
                    pair_counts[c.pair_group] >= cfg.per_trait_pair
                ):
                    continue
                if cfg.per_trait is not None and (
                    trait_counts[c.left_trait] >= cfg.per_trait
                    or trait_counts[c.right_trait] >= cfg.per_trait
                ):
                    continue
                sel.append(c)
                used.add(c.left)
                used.add(c.right)
                trait_counts[c.left_trait] += 1
                trait_counts[c.right_trait] += 1
                pair_counts[c.pair_group] += 1
                state["mixed"] += c.mixed_key
                state["sse"] += c.sq
                for t, k in ((c.left_trait, c.left_key), (c.right_trait, c.right_key)):
                    if k > 0:
                        plus[t] += 1
                stop = dfs(j + 1)
                sel.pop()
                used.discard(c.left)
                used.discard(c.right)
                trait_counts[c.left_trait] -= 1
                trait_counts[c.right_trait] -= 1
                pair_counts[c.pair_group] -= 1
                state["mixed"] -= c.mixed_key
                state["sse"] -= c.sq
                for t, k in ((c.left_trait, c.left_key), (c.right_trait, c.right_key)):
                    if k > 0:
                        plus[t] -= 1
                if stop:
                    return True
            return False

        dfs(0)
        if optimize:
            return best, best_val
        return best


def _diagnose_root(cands: list[CandidatePair], cfg: AssemblyConfig) -> str:
    """Name the first constraint family that is violated at the root relaxation."""
    if len(cands) < cfg.block_count:
        return "count"
    if len({i for c in cands for i in (c.left, c.right)}) < 2 * cfg.block_count:
        return "uniqueness"
    if cfg.per_trait_pair is not None:
        per_group = [0] * 10
        for c in cands:
            per_group[c.pair_group] += 1
        if any(n < cfg.per_trait_pair for n in per_group):
            return "domain-pair"
    if cfg.mixed_key_range is not None:
        n_mixed = sum(c.mixed_key for c in cands)
        if n_mixed < cfg.mixed_key_range[0]:
            return "mixed-key"
    return "combined"


def solve_stage1(
    cands: list[CandidatePair], cfg: AssemblyConfig
) -> tuple[float, list[CandidatePair]]:
    """Minimal feasible maximum desirability gap, with a feasible witness."""
    if not cands:
        raise InfeasibleError("no candidate pairs", "count")
    gaps = sorted({c.gap for c in cands})
    lo, hi = 0, len(gaps) - 1
    best: list[CandidatePair] | None = None
    best_m: float | None = None

    def feasible(m: float):
        eligible = [c for c in cands if c.gap <= m]
        search = _Search(eligible, cfg)
        witness = search.search()
        if search.budget_hit:
            raise BudgetExhaustedError("node budget exhausted during stage-1 feasibility")
        return witness

    if feasible(gaps[-1]) is None:
        raise InfeasibleError(
            "no selection satisfies the constraint set", _diagnose_root(cands, cfg)
        )
    while lo <= hi:
        mid = (lo + hi) // 2
        witness = feasible(gaps[mid])
        if witness is not None:
            best, best_m = witness, gaps[mid]
            hi = mid - 1
        else:
            lo = mid + 1
    assert best is not None and best_m is not None
    return best_m, best


def solve_stage2(
    cands: list[CandidatePair], cfg: AssemblyConfig, m_star: float
) -> AssemblySolution:
    """Minimize total squared mismatch subject to max gap <= m* + epsilon."""
    eligible = [c for c in cands if c.gap <= m_star + cfg.stage2_epsilon]
    search = _Search(eligible, cfg)
    best, best_sse = search.search(best_sse=math.inf)
    if best is None:
        raise InfeasibleError("stage 2 infeasible under the stage-1 cap", "combined")
    proof = "budget-exhausted-best-known" if search.budget_hit else "optimal"
    blocks = tuple(GfcBlock(c.left, c.right, c.gap) for c in best)
    return AssemblySolution(
        inventory=Inventory(blocks), m_star=m_star, sse=best_sse, proof=proof
    )


def assemble(pool: ItemPool, cfg: AssemblyConfig) -> AssemblySolution:
    cands = enumerate_candidates(pool)
    m_star, _ = solve_stage1(cands, cfg)
    return solve_stage2(cands, cfg, m_star)


def brute_force_assemble(
    cands: list[CandidatePair], cfg: AssemblyConfig
) -> AssemblySolution:
    """Exact lexicographic optimum by exhaustive enumeration (test oracle).

    Refuses instances beyond a hard cap rather than running unboundedly.
    """
    n_items = len({i for c in cands for i in (c.left, c.right)})
    n_nodes = math.comb(len(cands), cfg.block_count) if cands else 0
    if len(cands) > 40 or n_items > 14 or n_nodes > 5_000_000:
        raise InstanceTooLargeError(
            f"instance too large for brute force: {len(cands)} candidates, {n_items} items"
        )
    def better(key: tuple[float, float], ref: tuple[float, float] | None) -> bool:
        if ref is None:
            return True
        if key[0] < ref[0] - 1e-15:
            return True
        if key[0] > ref[0] + 1e-15:
            return False
        return key[1] < ref[1] - 1e-15

    best: tuple[CandidatePair, ...] | None = None
    best_key: tuple[float, float] | None = None
    for sel in itertools.combinations(cands, cfg.block_count):
        if not _check_selection(sel, cfg):
            continue
        key = (max(c.gap for c in sel), sum(c.sq for c in sel))
        if better(key, best_key):
            best, best_key = sel, key
    if best is None:
        raise InfeasibleError(
            "no feasible selection exists", _diagnose_root(cands, cfg)
        )
    blocks = tuple(GfcBlock(c.left, c.right, c.gap) for c in best)
    return AssemblySolution(
        inventory=Inventory(blocks), m_star=best_key[0], sse=best_key[1], proof="optimal"
    )
