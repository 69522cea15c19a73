"""Dataset record types shared by the synthetic generator and the
evaluation harness."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class VariantType(Enum):
    V1 = "V1"
    V3 = "V3"
    V5 = "V5"
    V10 = "V10"
    V20 = "V20"
    PARAPHRASE = "PARAPHRASE"
    BENIGN_PAIR = "BENIGN_PAIR"


#: How many token substitutions each word-flipping variant applies.
VARIANT_SUBSTITUTIONS = {
    VariantType.V1: 1,
    VariantType.V3: 3,
    VariantType.V5: 5,
    VariantType.V10: 10,
    VariantType.V20: 20,
}


@dataclass(frozen=True)
class PairRecord:
    """One labeled prompt pair: attack variants (label 1) or two unrelated
    benign prompts (label 0)."""

    id: str
    prompt_a: str
    prompt_b: str
    label: int
    variant_type: VariantType

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        benign = self.variant_type is VariantType.BENIGN_PAIR
        if (self.label == 1) == benign:
            raise ValueError(
                f"pair {self.id}: label {self.label} inconsistent with "
                f"variant_type {self.variant_type.value}")


@dataclass(frozen=True)
class CorpusRecord:
    """One corpus entry; attack_group links variants of the same attack."""

    id: str
    text: str
    is_attack: bool
    attack_group: str | None = None

    def __post_init__(self):
        if self.is_attack != (self.attack_group is not None):
            raise ValueError(
                f"record {self.id}: attack_group must be present iff is_attack")
