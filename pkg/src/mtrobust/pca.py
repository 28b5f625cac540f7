"""PCA projection of encoder-output dumps and the compactness statistic.

The dump format is the contract with whatever model produced the vectors:
a TSV whose header is `lang<TAB>variant<TAB>v0...v{d-1}`, one labeled
vector per row. A record with variant "seed" is the clean sentence of that
language; the other variants are its noisy versions. Dispersion measures
how far the noisy representations sit from their seed, in the full space
and in the 2-D projection: smaller means a more noise-invariant encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DegenerateDataError, DimensionMismatchError, MissingSeedError

SEED_VARIANT = "seed"

_SIGN_EPS = 1e-12


class VectorRecord(NamedTuple):
    language: str
    variant: str
    vector: np.ndarray


@dataclass
class PcaResult:
    mean: np.ndarray          # (dim,)
    components: np.ndarray    # (2, dim), orthonormal rows
    eigenvalues: np.ndarray   # (2,), descending
    projections: np.ndarray   # (n, 2)
    labels: list[tuple[str, str]]


def _as_matrix(records: Sequence[VectorRecord]) -> np.ndarray:
    dims = {len(r.vector) for r in records}
    if len(dims) != 1:
        raise DimensionMismatchError(f"records mix dimensions: {sorted(dims)}")
    return np.array([r.vector for r in records], dtype=np.float64)


def fit_pca(records: Sequence[VectorRecord]) -> PcaResult:
    """Top-2 principal components of the sample covariance, via SVD of the
    centered data matrix.

    Sign convention: the first coordinate of each component whose magnitude
    is non-negligible is made positive (projections flipped to match), so a
    given input always yields the same axes.
    """
    if len(records) < 3:
        raise DegenerateDataError(f"need at least 3 records, got {len(records)}")
    x = _as_matrix(records)
    n, dim = x.shape
    if dim < 2:
        raise DimensionMismatchError("vectors must have at least 2 dimensions")
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    scale = float(singular[0])
    if scale <= 0 or not np.isfinite(scale):
        raise DegenerateDataError("all records are identical (rank 0 data)")
    components = vt[:2].copy()
    eigenvalues = (singular[:2] ** 2) / (n - 1)
    projections = centered @ components.T
    for i in range(2):
        comp = components[i]
        nonzero = np.nonzero(np.abs(comp) > _SIGN_EPS * np.abs(comp).max())[0] \
            if np.abs(comp).max() > 0 else []
        if len(nonzero) and comp[nonzero[0]] < 0:
            components[i] = -comp
            projections[:, i] = -projections[:, i]
    return PcaResult(mean, components, eigenvalues, projections,
                     [(r.language, r.variant) for r in records])


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

@dataclass
class LanguageDispersion:
    mean_full: float       # mean distance to seed, full-dimension space
    mean_projected: float  # same, in the 2-D projection
    count: int


@dataclass
class DispersionStats:
    per_language: dict[str, LanguageDispersion]
    aggregate_full: float       # unweighted mean over languages
    aggregate_projected: float


def _seed_index(seeds: Sequence[VectorRecord]) -> dict[str, np.ndarray]:
    index = {}
    for record in seeds:
        if record.language in index:
            raise ValueError(f"more than one seed record for language {record.language!r}")
        index[record.language] = np.asarray(record.vector, dtype=np.float64)
    return index


def dispersion(records: Sequence[VectorRecord],
               seeds: Sequence[VectorRecord]) -> DispersionStats:
    """Per-language mean distance of noisy records to their language's seed."""
    seed_by_lang = _seed_index(seeds)
    missing = sorted({r.language for r in records} - set(seed_by_lang))
    if missing:
        raise MissingSeedError("no seed record for language(s): " + ", ".join(missing))

    combined = list(records) + list(seeds)
    try:
        fitted = fit_pca(combined)
        projections = fitted.projections
    except DegenerateDataError:
        # all points identical: every distance is 0 in any projection
        projections = np.zeros((len(combined), 2))
    noisy_proj = projections[: len(records)]
    seed_proj = {rec.language: projections[len(records) + i]
                 for i, rec in enumerate(seeds)}

    sums: dict[str, list[float]] = {}
    for rec, proj in zip(records, noisy_proj):
        full = float(np.linalg.norm(np.asarray(rec.vector, dtype=np.float64)
                                    - seed_by_lang[rec.language]))
        proj_dist = float(np.linalg.norm(proj - seed_proj[rec.language]))
        entry = sums.setdefault(rec.language, [0.0, 0.0, 0])
        entry[0] += full
        entry[1] += proj_dist
        entry[2] += 1

    per_language = {
        lang: LanguageDispersion(total_full / count, total_proj / count, count)
        for lang, (total_full, total_proj, count) in sorted(sums.items())
    }
    if per_language:
        aggregate_full = float(np.mean([d.mean_full for d in per_language.values()]))
        aggregate_projected = float(np.mean([d.mean_projected for d in per_language.values()]))
    else:
        aggregate_full = aggregate_projected = 0.0
    return DispersionStats(per_language, aggregate_full, aggregate_projected)


def dispersion_ratio(primary: DispersionStats, other: DispersionStats) -> tuple[float, float]:
    """(full, projected) aggregate ratios primary/other; >1 means the primary
    model's noisy representations are more dispersed."""
    if other.aggregate_full <= 0 or other.aggregate_projected <= 0:
        raise ZeroDivisionError("comparison model has zero aggregate dispersion")
    return (primary.aggregate_full / other.aggregate_full,
            primary.aggregate_projected / other.aggregate_projected)


def split_seeds(records: Sequence[VectorRecord]) -> tuple[list[VectorRecord], list[VectorRecord]]:
    """Partition a combined dump into (noisy records, seed records)."""
    noisy = [r for r in records if r.variant != SEED_VARIANT]
    seeds = [r for r in records if r.variant == SEED_VARIANT]
    return noisy, seeds


# ---------------------------------------------------------------------------
# TSV I/O
# ---------------------------------------------------------------------------

def read_vectors(path) -> list[VectorRecord]:
    """Read a labeled vector dump; the header's column count declares dim."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty vector file")
    header = lines[0].split("\t")
    if len(header) < 4 or header[0] != "lang" or header[1] != "variant":
        raise ValueError(f"{path}: header must be 'lang<TAB>variant<TAB>v0...', got {lines[0]!r}")
    dim = len(header) - 2
    records = []
    seen = set()
    for row_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != dim + 2:
            raise ValueError(
                f"{path}: row {row_no} has {len(fields) - 2} values, expected {dim}"
            )
        lang, variant = fields[0], fields[1]
        if (lang, variant) in seen:
            raise ValueError(f"{path}: row {row_no} repeats label ({lang}, {variant})")
        seen.add((lang, variant))
        try:
            vector = np.array([float(v) for v in fields[2:]], dtype=np.float64)
        except ValueError:
            raise ValueError(f"{path}: row {row_no} has a non-numeric field") from None
        records.append(VectorRecord(lang, variant, vector))
    if not records:
        raise ValueError(f"{path}: no records after header")
    return records


def write_vectors(records: Sequence[VectorRecord], path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = len(records[0].vector)
    header = "lang\tvariant\t" + "\t".join(f"v{i}" for i in range(dim))
    rows = [header]
    for r in records:
        rows.append(f"{r.language}\t{r.variant}\t" + "\t".join(f"{v:.17g}" for v in r.vector))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_projection(result: PcaResult, path):
    """Plot-ready TSV: lang, variant, x, y."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = ["lang\tvariant\tx\ty"]
    for (lang, variant), point in zip(result.labels, result.projections):
        rows.append(f"{lang}\t{variant}\t{point[0]:.17g}\t{point[1]:.17g}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_projection(path) -> list[tuple[str, str, float, float]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    out = []
    for line in lines[1:]:
        if not line:
            continue
        lang, variant, x, y = line.split("\t")
        out.append((lang, variant, float(x), float(y)))
    return out


def format_dispersion_block(stats: DispersionStats,
                            compare: Optional[DispersionStats] = None) -> str:
    """Fixed-format stats block for the dispersion subcommand."""
    rows = []
    for lang, d in stats.per_language.items():
        rows.append(f"lang={lang} n={d.count} full={d.mean_full:.6f} proj2d={d.mean_projected:.6f}")
    rows.append(f"aggregate full={stats.aggregate_full:.6f} proj2d={stats.aggregate_projected:.6f}")
    if compare is not None:
        rows.append(
            f"compare full={compare.aggregate_full:.6f} proj2d={compare.aggregate_projected:.6f}"
        )
        ratio_full, ratio_proj = dispersion_ratio(stats, compare)
        rows.append(f"ratio full={ratio_full:.6f} proj2d={ratio_proj:.6f}")
    return "\n".join(rows)
