"""Label taxonomy for potentially abusive Terms of Service clauses.

Labels fall into three categories: "illegal" (directly contrary to an
express legal norm), "dark" (manifestly abusive, presumptively unfair)
and "gray" (abusiveness depends on open-textured standards such as good
faith). The default registry carries 24 codes; callers may register an
extended taxonomy from a JSON config instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

CATEGORIES = ("illegal", "dark", "gray")

_LPC_URL = "https://www.bcn.cl/leychile/navegar?idNorma=61438"
_CIVIL_CODE_URL = "https://www.bcn.cl/leychile/navegar?idNorma=172986"
_COT_URL = "https://www.bcn.cl/leychile/navegar?idNorma=25563"


class TaxonomyError(ValueError):
    """Raised for duplicate or unknown label codes."""


@dataclass(frozen=True)
class LabelCode:
    """One registered clause label.

    ``code`` is the short identifier used in annotations and model
    output; ``explanation`` is a one-line consumer-facing rationale.
    """

    code: str
    display_name: str
    category: str
    explanation: str
    legal_ref_url: Optional[str] = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise TaxonomyError(
                f"unknown category {self.category!r} for code {self.code!r}"
            )


_DEFAULT_LABELS: tuple[LabelCode, ...] = (
    # Illegal: contrary to an express norm.
    LabelCode(
        "ILG NA",
        "Applicable law contrary to mandatory rules",
        "illegal",
        "Designates a governing law or norm that displaces mandatory consumer protections.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG LPC PRO",
        "Unlawful alteration of judicial competence",
        "illegal",
        "Imposes a forum or modifies court competence against consumer-law procedural rules.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG RC",
        "Civil liability regime override",
        "illegal",
        "Alters the contractual liability regime of the Civil Code to the consumer's detriment.",
        _CIVIL_CODE_URL,
    ),
    LabelCode(
        "ILG LPC",
        "Consumer-law violation (residual)",
        "illegal",
        "Contradicts the consumer protection statute without fitting a more specific code.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG LPC INT",
        "Unlawful de-intermediation",
        "illegal",
        "Provider disclaims responsibility for goods or services offered through intermediaries.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG LPC JUS",
        "Restricted access to justice",
        "illegal",
        "Blocks or conditions the consumer's statutory avenues of judicial recourse.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG acp",
        "Tacit acceptance",
        "illegal",
        "Binds the consumer by mere use or visit instead of lawful express acceptance.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG ng",
        "Unjustified refusal to sell",
        "illegal",
        "Reserves the right to refuse service or sale without lawful justification.",
        _LPC_URL,
    ),
    LabelCode(
        "ILG COT",
        "Jurisdiction contrary to the Code of Courts",
        "illegal",
        "Affects absolute or relative jurisdiction in conflict with the courts statute.",
        _COT_URL,
    ),
    # Dark: presumptively unfair.
    LabelCode(
        "ltd",
        "Limitation of liability",
        "dark",
        "Excludes or caps in advance the provider's liability for defective performance.",
        _LPC_URL,
    ),
    LabelCode(
        "cr",
        "Unilateral contract modification",
        "dark",
        "Lets the provider change the terms at will without a real chance to object.",
        _LPC_URL,
    ),
    LabelCode(
        "nod",
        "Obstacles to exercising rights",
        "dark",
        "Burdens or delays the exercise of consumer rights without removing them outright.",
        _LPC_URL,
    ),
    LabelCode(
        "ter",
        "Unilateral termination",
        "dark",
        "Lets the provider end the contract at its sole discretion without justified cause.",
        _LPC_URL,
    ),
    LabelCode(
        "er",
        "Consumer pays for provider errors",
        "dark",
        "Shifts the cost of the provider's own mistakes or omissions onto the consumer.",
        _LPC_URL,
    ),
    LabelCode(
        "ch",
        "Unilateral price change",
        "dark",
        "Lets the provider raise prices unilaterally and without proper justification.",
        _LPC_URL,
    ),
    # Gray: interpretation-dependent.
    LabelCode(
        "des risk",
        "Consumer assumes risks",
        "gray",
        "Transfers contract risks or costs to the consumer without matching responsibility.",
        _LPC_URL,
    ),
    LabelCode(
        "des uni",
        "Terms changed without notice",
        "gray",
        "Allows modification of terms with no prior notice, leaving only the exit option.",
    ),
    LabelCode(
        "des reser",
        "Discretionary service modification",
        "gray",
        "Reserves the right to limit or suppress parts of the service at sole discretion.",
    ),
    LabelCode(
        "bfe",
        "Contrary to good faith",
        "gray",
        "Creates consumer detriment against the good-faith standard, absent a specific code.",
        _LPC_URL,
    ),
    LabelCode(
        "des def",
        "Consumer indemnifies provider",
        "gray",
        "Obliges the consumer to defend or hold the provider harmless in disputes.",
    ),
    LabelCode(
        "des det",
        "Provider-run dispute process",
        "gray",
        "Channels complaints into the provider's internal procedure, affecting recourse.",
    ),
    LabelCode(
        "des inf",
        "Data shared with third parties",
        "gray",
        "Permits transfer of user information to third parties unrelated to the service.",
    ),
    LabelCode(
        "des lic",
        "Excessive or perpetual powers",
        "gray",
        "Grants the provider very broad, perpetual or irrevocable powers over the consumer.",
    ),
    LabelCode(
        "des us",
        "Risks from other users",
        "gray",
        "Disclaims responsibility for harm arising from user-to-user interactions.",
    ),
)


class Taxonomy:
    """Registry of label codes, preserving registration order."""

    def __init__(self, labels: Iterable[LabelCode]):
        self._labels: dict[str, LabelCode] = {}
        for label in labels:
            if label.code in self._labels:
                raise TaxonomyError(f"duplicate label code {label.code!r}")
            self._labels[label.code] = label

    @classmethod
    def default(cls) -> "Taxonomy":
        return cls(_DEFAULT_LABELS)

    @classmethod
    def from_json(cls, path: str | Path) -> "Taxonomy":
        """Load an extended taxonomy from a JSON list of label objects."""
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        labels = [
            LabelCode(
                code=entry["code"],
                display_name=entry["display_name"],
                category=entry["category"],
                explanation=entry.get("explanation", ""),
                legal_ref_url=entry.get("legal_ref_url"),
            )
            for entry in raw
        ]
        return cls(labels)

    def get(self, code: str) -> LabelCode:
        try:
            return self._labels[code]
        except KeyError:
            raise TaxonomyError(f"unknown label code {code!r}") from None

    def codes(self) -> list[str]:
        return list(self._labels)

    def by_category(self, category: str) -> list[str]:
        if category not in CATEGORIES:
            raise TaxonomyError(f"unknown category {category!r}")
        return [c for c, l in self._labels.items() if l.category == category]

    def sort_codes(self, codes: Iterable[str]) -> list[str]:
        """Return ``codes`` in registration order (unknown codes rejected)."""
        wanted = set(codes)
        for code in wanted:
            self.get(code)
        return [c for c in self._labels if c in wanted]

    def __contains__(self, code: str) -> bool:
        return code in self._labels

    def __iter__(self) -> Iterator[LabelCode]:
        return iter(self._labels.values())

    def __len__(self) -> int:
        return len(self._labels)


def category_of(taxonomy: Taxonomy, codes: Sequence[str]) -> set[str]:
    """Categories touched by a set of label codes."""
    return {taxonomy.get(c).category for c in codes}
