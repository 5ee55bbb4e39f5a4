from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class CostTally:
    """Elementary operation counts for one evaluation or one streaming step."""

    multiplies: int = 0
    adds: int = 0
    shifts: int = 0
    cache_hits: int = 0

    def __add__(self, other: CostTally) -> CostTally:
        return CostTally(
            self.multiplies + other.multiplies,
            self.adds + other.adds,
            self.shifts + other.shifts,
            self.cache_hits + other.cache_hits,
        )

    def as_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class CostPolicy:
    count_shifts_as_multiplies: bool = False
    cse_max_passes: int = 64

    def __post_init__(self):
        if self.cse_max_passes < 0:
            raise ValueError("cse_max_passes must be >= 0")
