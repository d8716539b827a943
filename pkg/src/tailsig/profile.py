"""Transaction-mix workload profile for a record stream."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .ingest import TransactionRecord

COVERAGE_PERCENTILES = (80, 90, 95, 100)


@dataclass(frozen=True)
class WorkloadProfile:
    total_tx: int
    n_types: int
    type_counts: tuple[tuple[str, int], ...]  # ranked by descending count, then label
    top10_share: float
    types_ge_1pct: int
    top5_shares: tuple[float, ...]
    types_to_cover: dict[int, int]

    @property
    def top5_cumulative(self) -> float:
        return sum(self.top5_shares)

    def as_dict(self) -> dict:
        return {
            "total_tx": self.total_tx,
            "n_types": self.n_types,
            "top10_share": self.top10_share,
            "types_ge_1pct": self.types_ge_1pct,
            "top5_shares": list(self.top5_shares),
            "top5_cumulative": self.top5_cumulative,
            "types_to_cover": {str(p): n for p, n in sorted(self.types_to_cover.items())},
            "type_counts": [{"tx_type": t, "count": c} for t, c in self.type_counts],
        }


def profile_counts(counts: dict[str, int]) -> WorkloadProfile:
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("workload profile needs at least one transaction")
    ranked = tuple(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    cover = {}
    for pct in COVERAGE_PERCENTILES:
        running = 0
        for n, (_, c) in enumerate(ranked, start=1):
            running += c
            # cumulative share >= pct/100, in integers
            if running * 100 >= pct * total:
                cover[pct] = n
                break

    return WorkloadProfile(
        total_tx=total,
        n_types=len(ranked),
        type_counts=ranked,
        top10_share=sum(c for _, c in ranked[:10]) / total,
        types_ge_1pct=sum(1 for _, c in ranked if c * 100 >= total),
        top5_shares=tuple(c / total for _, c in ranked[:5]),
        types_to_cover=cover,
    )


def workload_profile(records: Iterable[TransactionRecord]) -> WorkloadProfile:
    """Rank transaction types by traffic share and count types per coverage level."""
    return profile_counts(Counter(r.tx_type for r in records))
