"""Domain types for statements, blocks, inventories, and response data.

Everything here is immutable after construction and safe to share across
threads. File formats are line-oriented CSV with fixed headers (see the
``read_*`` / ``write_*`` helpers).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class SdrkitError(Exception):
    """Base class for all package errors."""


class PoolError(SdrkitError):
    """Malformed or inconsistent item pool data."""


class InventoryError(SdrkitError):
    """Inventory references items that cannot be resolved."""


class TraitDomain(enum.Enum):
    """Big Five trait domains, in fixed (A, C, E, N, O) index order."""

    A = 0  # agreeableness
    C = 1  # conscientiousness
    E = 2  # extraversion
    N = 3  # neuroticism
    O = 4  # openness

    @property
    def index(self) -> int:
        return self.value

    @classmethod
    def from_label(cls, label: str) -> "TraitDomain":
        try:
            return cls[label.strip().upper()]
        except KeyError:
            raise PoolError(f"unknown domain label: {label!r}") from None


TRAIT_ORDER: tuple[TraitDomain, ...] = tuple(TraitDomain)
TRAIT_LABELS: tuple[str, ...] = tuple(t.name for t in TRAIT_ORDER)

#: Desirability-direction multiplier: endorsing high A/C/E/O is socially
#: desirable, low N is. Used by the effect-size direction correction.
DESIRABLE_DIRECTION: dict[TraitDomain, int] = {
    TraitDomain.A: +1,
    TraitDomain.C: +1,
    TraitDomain.E: +1,
    TraitDomain.N: -1,
    TraitDomain.O: +1,
}

N_CATEGORIES = 7  # both response formats use a 7-point scale


@dataclass(frozen=True)
class Item:
    id: str
    text: str
    domain: TraitDomain
    keying: int  # +1 positively keyed, -1 negatively keyed
    desirability: float | None = None  # 1..9 scale, None until rated

    def __post_init__(self) -> None:
        if self.keying not in (+1, -1):
            raise PoolError(f"item {self.id!r}: keying must be +1 or -1, got {self.keying}")
        if not self.text:
            raise PoolError(f"item {self.id!r}: empty statement text")
        if self.desirability is not None and not (1.0 <= self.desirability <= 9.0):
            raise PoolError(
                f"item {self.id!r}: desirability {self.desirability} outside [1, 9]"
            )


@dataclass(frozen=True)
class ItemPool:
    items: tuple[Item, ...]
    excluded_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for it in self.items:
            if it.id in seen:
                raise PoolError(f"duplicate item id: {it.id!r}")
            seen.add(it.id)

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def get(self, item_id: str) -> Item:
        item = self.by_id().get(item_id)
        if item is None:
            raise InventoryError(f"unresolved item id: {item_id!r}")
        return item

    def by_id(self) -> dict[str, Item]:
        # dataclass is frozen; cache on first use
        cache = self.__dict__.get("_by_id")
        if cache is None:
            cache = {it.id: it for it in self.items}
            self.__dict__["_by_id"] = cache
        return cache

    def with_desirability(self, scores: Mapping[str, float]) -> "ItemPool":
        """Return a copy with desirability scores attached from ``scores``."""
        missing = [it.id for it in self.items if it.id not in scores]
        if missing:
            raise PoolError(f"no desirability score for items: {missing[:5]}")
        items = tuple(
            Item(it.id, it.text, it.domain, it.keying, float(scores[it.id]))
            for it in self.items
        )
        return ItemPool(items, self.excluded_ids)


@dataclass(frozen=True)
class GfcBlock:
    left: str
    right: str
    desirability_gap: float

    def __post_init__(self) -> None:
        if self.left == self.right:
            raise InventoryError(f"block pairs item {self.left!r} with itself")
        if self.desirability_gap < 0:
            raise InventoryError("desirability gap must be nonnegative")


@dataclass(frozen=True)
class Inventory:
    blocks: tuple[GfcBlock, ...]

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def statements(self) -> tuple[str, ...]:
        """Unique item ids in block order; this is the Likert form."""
        out: list[str] = []
        for b in self.blocks:
            out.append(b.left)
            out.append(b.right)
        return tuple(out)


class ResponseFormat(enum.Enum):
    LIKERT = "likert"
    GFC = "gfc"


class InstructionCondition(enum.Enum):
    HONEST = "honest"
    FAKE_GOOD = "fake_good"


@dataclass(frozen=True)
class ResponseSet:
    respondent_id: str
    persona_id: str
    format: ResponseFormat
    condition: InstructionCondition
    answers: Mapping[str, int]  # unit id (item or block) -> 1..7
    presentation_order: tuple[str, ...]
    side_assignment: Mapping[str, bool] = field(default_factory=dict)  # block id -> flipped

    def __post_init__(self) -> None:
        for unit, ans in self.answers.items():
            if not (1 <= ans <= N_CATEGORIES):
                raise SdrkitError(f"answer for {unit!r} out of range: {ans}")
        if set(self.presentation_order) != set(self.answers):
            raise SdrkitError("presentation order does not cover exactly the answered units")


# ---------------------------------------------------------------------------
# Assembly configuration and validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssemblyConfig:
    """Constraint set for inventory assembly and validation.

    Defaults reproduce the published constraint set for a given block count
    ``P`` (divisible by 10): each trait appears 2P/5 times, each unordered
    trait pair P/10 times, mixed-key blocks within [0.4P, 0.6P], and each
    keying sign covers at least 30% of the selected items within each trait.
    Any of the balance targets may be disabled by passing ``None``.
    """

    block_count: int
    per_trait: int | None = None
    per_trait_pair: int | None = None
    mixed_key_range: tuple[int, int] | None = None
    sign_floor: float | None = 0.30
    stage2_epsilon: float = 1e-9
    node_budget: int | None = None

    @classmethod
    def standard(cls, block_count: int = 30) -> "AssemblyConfig":
        if block_count % 10 != 0:
            raise SdrkitError("block count must be divisible by 10 for the standard config")
        p = block_count
        return cls(
            block_count=p,
            per_trait=2 * p // 5,
            per_trait_pair=p // 10,
            mixed_key_range=(int(0.4 * p + 0.5), int(0.6 * p + 0.5)),
        )


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]
    trait_counts: dict[str, int]
    trait_pair_counts: dict[tuple[str, str], int]
    mixed_key_count: int
    sign_counts: dict[str, tuple[int, int]]  # trait -> (n_plus, n_minus)
    max_gap: float
    mean_gap: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def validate_inventory(
    inv: Inventory,
    pool: ItemPool,
    cfg: AssemblyConfig,
    gap_tol: float = 1e-12,
) -> ConstraintReport:
    """Check an inventory against the assembly constraint set.

    ``gap_tol`` bounds the allowed discrepancy between each block's stored
    desirability gap and the gap recomputed from the pool; solver output must
    agree to 1e-12, while inventories transcribed from 2-decimal published
    tables need roughly 0.015. Reported max/mean gaps use the stored values.
    """
    checks: list[ConstraintCheck] = []
    trait_counts = {t: 0 for t in TRAIT_LABELS}
    pair_counts: dict[tuple[str, str], int] = {}
    sign_counts = {t: [0, 0] for t in TRAIT_LABELS}
    mixed = 0
    seen_items: set[str] = set()
    dup: list[str] = []
    same_domain: list[int] = []
    gap_errs: list[int] = []

    for idx, b in enumerate(inv.blocks, start=1):
        li, ri = pool.get(b.left), pool.get(b.right)
        if li.desirability is None or ri.desirability is None:
            raise InventoryError(f"block {idx}: item without desirability score")
        for it in (li, ri):
            if it.id in seen_items:
                dup.append(it.id)
            seen_items.add(it.id)
            trait_counts[it.domain.name] += 1
            sign_counts[it.domain.name][0 if it.keying > 0 else 1] += 1
        if li.domain == ri.domain:
            same_domain.append(idx)
        key = tuple(sorted((li.domain.name, ri.domain.name)))
        pair_counts[key] = pair_counts.get(key, 0) + 1
        if li.keying != ri.keying:
            mixed += 1
        if abs(abs(li.desirability - ri.desirability) - b.desirability_gap) > gap_tol:
            gap_errs.append(idx)

    gaps = [b.desirability_gap for b in inv.blocks]
    max_gap = max(gaps) if gaps else 0.0
    mean_gap = sum(gaps) / len(gaps) if gaps else 0.0

    checks.append(
        ConstraintCheck(
            "block-count",
            len(inv.blocks) == cfg.block_count,
            f"{len(inv.blocks)} blocks, expected {cfg.block_count}",
        )
    )
    checks.append(ConstraintCheck("item-uniqueness", not dup, f"reused items: {dup}"))
    checks.append(ConstraintCheck("cross-domain", not same_domain, f"same-domain blocks: {same_domain}"))
    checks.append(
        ConstraintCheck("gap-consistency", not gap_errs, f"blocks with inconsistent gaps: {gap_errs}")
    )
    if cfg.per_trait is not None:
        bad = {t: n for t, n in trait_counts.items() if n != cfg.per_trait}
        checks.append(ConstraintCheck("trait-counts", not bad, f"off-target traits: {bad}"))
    if cfg.per_trait_pair is not None:
        all_pairs = [
            (a, b) for i, a in enumerate(TRAIT_LABELS) for b in TRAIT_LABELS[i + 1 :]
        ]
        bad_pairs = {
            p: pair_counts.get(p, 0)
            for p in all_pairs
            if pair_counts.get(p, 0) != cfg.per_trait_pair
        }
        checks.append(ConstraintCheck("trait-pair-counts", not bad_pairs, f"off-target pairs: {bad_pairs}"))
    if cfg.mixed_key_range is not None:
        lo, hi = cfg.mixed_key_range
        checks.append(
            ConstraintCheck("mixed-key", lo <= mixed <= hi, f"{mixed} mixed-key blocks, want [{lo}, {hi}]")
        )
    if cfg.sign_floor is not None:
        bad_signs = {}
        for t, (np_, nm) in sign_counts.items():
            total = np_ + nm
            if total and (np_ < cfg.sign_floor * total or nm < cfg.sign_floor * total):
                bad_signs[t] = (np_, nm)
        checks.append(ConstraintCheck("sign-balance", not bad_signs, f"imbalanced traits: {bad_signs}"))

    return ConstraintReport(
        checks=tuple(checks),
        trait_counts=trait_counts,
        trait_pair_counts=pair_counts,
        mixed_key_count=mixed,
        sign_counts={t: (v[0], v[1]) for t, v in sign_counts.items()},
        max_gap=max_gap,
        mean_gap=mean_gap,
    )


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

POOL_HEADER = ["id", "text", "domain", "keying", "desirability"]
INVENTORY_HEADER = ["block", "left_id", "right_id", "desirability_gap"]
RESPONSE_HEADER = [
    "respondent_id",
    "persona_id",
    "format",
    "condition",
    "unit_id",
    "answer",
    "position",
    "side_flipped",
]


def load_item_pool(path: str | Path, exclude_ids: Iterable[str] = ()) -> ItemPool:
    """Load an item pool from CSV, applying the configured exclusions.

    Item order is the file order. Raises :class:`PoolError` on duplicate ids,
    unknown domain labels, keying outside {+1, -1}, desirability outside
    [1, 9], or an empty pool.
    """
    path = Path(path)
    exclude = set(exclude_ids)
    items: list[Item] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(POOL_HEADER[:4]) <= set(reader.fieldnames):
            raise PoolError(f"{path}: expected header columns {POOL_HEADER[:4]}")
        for row in reader:
            if row["id"] in exclude:
                continue
            try:
                keying = int(row["keying"])
            except ValueError:
                raise PoolError(f"{path}: row {row['id']!r}: bad keying {row['keying']!r}") from None
            des = row.get("desirability")
            desirability = float(des) if des not in (None, "") else None
            items.append(
                Item(
                    id=row["id"],
                    text=row["text"],
                    domain=TraitDomain.from_label(row["domain"]),
                    keying=keying,
                    desirability=desirability,
                )
            )
    if not items:
        raise PoolError(f"{path}: empty pool")
    return ItemPool(tuple(items), tuple(sorted(exclude)))


def write_item_pool(pool: ItemPool, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(POOL_HEADER)
        for it in pool.items:
            w.writerow(
                [it.id, it.text, it.domain.name, it.keying,
                 "" if it.desirability is None else repr(it.desirability)]
            )


def load_inventory(path: str | Path) -> Inventory:
    blocks: list[GfcBlock] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            blocks.append(
                GfcBlock(row["left_id"], row["right_id"], float(row["desirability_gap"]))
            )
    if not blocks:
        raise InventoryError(f"{path}: empty inventory")
    return Inventory(tuple(blocks))


def write_inventory(inv: Inventory, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INVENTORY_HEADER)
        for i, b in enumerate(inv.blocks, start=1):
            w.writerow([i, b.left, b.right, repr(b.desirability_gap)])


def write_response_sets(sets: Sequence[ResponseSet], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESPONSE_HEADER)
        for rs in sets:
            pos = {unit: i for i, unit in enumerate(rs.presentation_order)}
            for unit in rs.presentation_order:
                w.writerow(
                    [
                        rs.respondent_id,
                        rs.persona_id,
                        rs.format.value,
                        rs.condition.value,
                        unit,
                        rs.answers[unit],
                        pos[unit],
                        int(bool(rs.side_assignment.get(unit, False))),
                    ]
                )


def load_response_sets(path: str | Path) -> list[ResponseSet]:
    groups: dict[tuple, list[dict]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["respondent_id"], row["persona_id"], row["format"], row["condition"])
            groups.setdefault(key, []).append(row)
    out: list[ResponseSet] = []
    for (resp, persona, fmt, cond), rows in groups.items():
        rows.sort(key=lambda r: int(r["position"]))
        out.append(
            ResponseSet(
                respondent_id=resp,
                persona_id=persona,
                format=ResponseFormat(fmt),
                condition=InstructionCondition(cond),
                answers={r["unit_id"]: int(r["answer"]) for r in rows},
                presentation_order=tuple(r["unit_id"] for r in rows),
                side_assignment={r["unit_id"]: bool(int(r["side_flipped"])) for r in rows},
            )
        )
    return out
