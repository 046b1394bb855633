"""Face-verification metrics over externally produced embeddings.

Scores are cosine similarities; the decision rule is ``score >= threshold
means same`` (boundary inclusive).  ROC curves sweep the sorted union of
observed scores plus one above-maximum sentinel, with no interpolation;
TAR@FAR uses the step rule (largest achieved FAR at or below the target).
Cross-validated accuracy picks, per held-out fold, the smallest threshold
from the same candidate sweep that maximizes accuracy on the other folds.

File formats (UTF-8 text, whitespace-separated):
  embeddings:  <image-id> v1 v2 ... vd
  pairs:       <id-a> <id-b> <same|diff> [fold]
  templates:   <subject-id> <image-id> [<image-id> ...]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EvalFormatError


@dataclass(frozen=True)
class EmbeddingSet:
    """Uniform-dimension embedding vectors keyed by image id."""

    vectors: dict[str, np.ndarray]
    dimension: int

    @classmethod
    def from_vectors(cls, vectors: dict[str, np.ndarray]) -> "EmbeddingSet":
        if not vectors:
            raise EvalFormatError("embedding set is empty")
        clean: dict[str, np.ndarray] = {}
        dim = None
        for key, value in vectors.items():
            arr = np.ascontiguousarray(value, dtype=np.float64)
            if dim is None:
                dim = arr.size
            if arr.ndim != 1 or arr.size != dim:
                raise EvalFormatError(
                    f"embedding {key!r} has dimension {arr.size}, expected {dim}"
                )
            if not np.all(np.isfinite(arr)):
                raise EvalFormatError(f"embedding {key!r} contains non-finite values")
            if np.linalg.norm(arr) == 0.0:
                raise EvalFormatError(f"embedding {key!r} has zero norm")
            clean[key] = arr
        return cls(clean, int(dim))

    def vector(self, image_id: str) -> np.ndarray:
        try:
            return self.vectors[image_id]
        except KeyError:
            raise EvalFormatError(f"unknown image id {image_id!r}") from None

    def __len__(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class Pair:
    id_a: str
    id_b: str
    same: bool
    fold: int | None = None


@dataclass(frozen=True)
class PairList:
    pairs: tuple[Pair, ...]

    def __post_init__(self):
        if not self.pairs:
            raise EvalFormatError("pair list is empty")
        folds = [p.fold for p in self.pairs]
        with_fold = [f for f in folds if f is not None]
        if with_fold and len(with_fold) != len(folds):
            raise EvalFormatError("either every pair has a fold or none does")

    @property
    def fold_count(self) -> int:
        folds = {p.fold for p in self.pairs if p.fold is not None}
        return len(folds)

    def with_folds(self, fold_count: int) -> "PairList":
        """Assign contiguous, nearly equal folds 1..fold_count in list order."""
        n = len(self.pairs)
        if fold_count < 2 or fold_count > n:
            raise ConfigError(f"fold count must be in [2, {n}]")
        bounds = np.linspace(0, n, fold_count + 1).astype(int)
        assigned = []
        for f in range(fold_count):
            for p in self.pairs[bounds[f] : bounds[f + 1]]:
                assigned.append(Pair(p.id_a, p.id_b, p.same, f + 1))
        return PairList(tuple(assigned))

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Template:
    """One subject's image set, compared jointly during verification."""

    subject_id: str
    image_ids: tuple[str, ...]

    def __post_init__(self):
        if not self.image_ids:
            raise EvalFormatError(f"template {self.subject_id!r} is empty")


@dataclass(frozen=True)
class RocCurve:
    """Operating points swept over increasing thresholds."""

    thresholds: np.ndarray
    far: np.ndarray
    tar: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        far = np.asarray(self.far, dtype=np.float64)
        tar = np.asarray(self.tar, dtype=np.float64)
        if not (t.size and t.size == far.size == tar.size):
            raise ConfigError("curve arrays must be non-empty and equal length")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("thresholds must be strictly increasing")
        if np.any(np.diff(far) > 0) or np.any(np.diff(tar) > 0):
            raise ConfigError("FAR and TAR must be non-increasing in threshold")
        if far[0] != 1.0 or far[-1] != 0.0:
            raise ConfigError("curve must cover FAR from 1 down to 0")
        for name, arr in (("far", far), ("tar", tar)):
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ConfigError(f"{name} values must lie in [0, 1]")
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "far", far)
        object.__setattr__(self, "tar", tar)

    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.tar.tolist()))


def cosine_similarity(a, b) -> float:
    """Normalized dot product in [-1, 1]; zero-norm inputs are rejected."""
    av = np.asarray(a, dtype=np.float64)
    bv = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(av), np.linalg.norm(bv)
    if na == 0.0 or nb == 0.0:
        raise ConfigError("cosine similarity undefined for zero-norm vectors")
    return float(av @ bv / (na * nb))


def template_similarity(
    t1: Template, t2: Template, embeddings: EmbeddingSet, beta: float = 1.0
) -> float:
    """Softmax-averaged cross-pair similarity between two image sets.

    With weights w_ij = exp(beta * s_ij) / sum exp(beta * s_kl) over all
    cross pairs; beta = 0 is the arithmetic mean, large beta approaches the
    maximum score.
    """
    if beta < 0:
        raise ConfigError("beta must be non-negative")
    scores = np.array(
        [
            cosine_similarity(embeddings.vector(a), embeddings.vector(b))
            for a in t1.image_ids
            for b in t2.image_ids
        ]
    )
    logits = beta * scores
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return float(weights @ scores)


def pair_scores(
    pairs: PairList,
    embeddings: EmbeddingSet,
    templates: dict[str, Template] | None = None,
    beta: float = 1.0,
) -> np.ndarray:
    """Similarity score per pair; ids refer to templates when given."""
    out = np.empty(len(pairs))
    for k, pair in enumerate(pairs.pairs):
        if templates is not None:
            try:
                t1, t2 = templates[pair.id_a], templates[pair.id_b]
            except KeyError as exc:
                raise EvalFormatError(f"unknown template id {exc.args[0]!r}") from None
            out[k] = template_similarity(t1, t2, embeddings, beta)
        else:
            out[k] = cosine_similarity(
                embeddings.vector(pair.id_a), embeddings.vector(pair.id_b)
            )
    return out


def _candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Sweep set: every observed score plus one above-maximum sentinel."""
    uniq = np.unique(scores)
    return np.append(uniq, uniq[-1] + 1.0)


def compute_roc(pos_scores, neg_scores) -> RocCurve:
    """ROC from genuine/impostor score lists by exact counting."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("both positive and negative score lists must be non-empty")
    thresholds = _candidate_thresholds(np.concatenate([pos, neg]))
    # count of scores >= t via sorted positions
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    tar = (pos.size - np.searchsorted(pos_sorted, thresholds, side="left")) / pos.size
    far = (neg.size - np.searchsorted(neg_sorted, thresholds, side="left")) / neg.size
    return RocCurve(thresholds, far, tar)


def tar_at_far(curve: RocCurve, far_target: float) -> float:
    """Step rule: best TAR among operating points with FAR <= target."""
    if not (0.0 <= far_target <= 1.0):
        raise ConfigError("far_target must lie in [0, 1]")
    eligible = curve.far <= far_target
    if not eligible.any():
        return 0.0
    return float(curve.tar[eligible].max())


def cross_validated_accuracy(
    pairs: PairList,
    embeddings: EmbeddingSet,
    templates: dict[str, Template] | None = None,
    beta: float = 1.0,
) -> tuple[float, list[float]]:
    """LFW-style fold-held-out accuracy; returns (mean, per-fold list).

    Per fold f the threshold maximizing train accuracy (ties: smallest
    candidate) is applied to fold f with the ``score >= t`` rule.
    """
    folds = sorted({p.fold for p in pairs.pairs if p.fold is not None})
    if len(folds) < 2:
        raise ConfigError("pairs must carry >= 2 folds (use PairList.with_folds)")
    scores = pair_scores(pairs, embeddings, templates, beta)
    labels = np.array([p.same for p in pairs.pairs])
    fold_of = np.array([p.fold for p in pairs.pairs])

    accuracies = []
    for f in folds:
        test = fold_of == f
        train = ~test
        if not test.any() or not train.any():
            raise ConfigError(f"fold {f} leaves an empty train or test split")
        candidates = _candidate_thresholds(scores[train])
        predictions = scores[train][None, :] >= candidates[:, None]
        train_acc = (predictions == labels[train][None, :]).mean(axis=1)
        best = candidates[int(np.argmax(train_acc))]  # first max = smallest threshold
        accuracies.append(float(((scores[test] >= best) == labels[test]).mean()))
    return float(np.mean(accuracies)), accuracies


def load_embeddings(path) -> EmbeddingSet:
    """Parse ``<image-id> v1 ... vd`` rows; dimensions must agree."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split()
                if len(fields) < 2:
                    raise EvalFormatError(f"{path}:{lineno}: need an id and values")
                key = fields[0]
                if key in vectors:
                    raise EvalFormatError(f"{path}:{lineno}: duplicate id {key!r}")
                try:
                    values = np.array([float(v) for v in fields[1:]])
                except ValueError as exc:
                    raise EvalFormatError(f"{path}:{lineno}: {exc}") from exc
                if dim is None:
                    dim = values.size
                elif values.size != dim:
                    raise EvalFormatError(
                        f"{path}:{lineno}: dimension {values.size} != first row's {dim}"
                    )
                vectors[key] = values
    except OSError as exc:
        raise EvalFormatError(f"cannot read embeddings {path}: {exc}") from exc
    return EmbeddingSet.from_vectors(vectors)


def save_embeddings(embeddings: EmbeddingSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, vec in embeddings.vectors.items():
            fh.write(key + " " + " ".join(repr(float(v)) for v in vec) + "\n")


_LABELS = {"same": True, "diff": False}


def load_pairs(path, embeddings: EmbeddingSet | None = None) -> PairList:
    """Parse ``<id-a> <id-b> <same|diff> [fold]`` rows.

    When ``embeddings`` is given, every referenced id must exist in it.
    """
    pairs: list[Pair] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split()
                if len(fields) not in (3, 4):
                    raise EvalFormatError(
                        f"{path}:{lineno}: expected 'id_a id_b same|diff [fold]'"
                    )
                if fields[2] not in _LABELS:
                    raise EvalFormatError(
                        f"{path}:{lineno}: label must be 'same' or 'diff', got {fields[2]!r}"
                    )
                fold = None
                if len(fields) == 4:
                    try:
                        fold = int(fields[3])
                    except ValueError as exc:
                        raise EvalFormatError(f"{path}:{lineno}: bad fold: {exc}") from exc
                pairs.append(Pair(fields[0], fields[1], _LABELS[fields[2]], fold))
    except OSError as exc:
        raise EvalFormatError(f"cannot read pairs {path}: {exc}") from exc
    result = PairList(tuple(pairs))
    if embeddings is not None:
        for pair in result.pairs:
            embeddings.vector(pair.id_a)
            embeddings.vector(pair.id_b)
    return result


def load_templates(path) -> dict[str, Template]:
    """Parse ``<subject-id> <image-id>...`` rows into a template map."""
    templates: dict[str, Template] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split()
                if len(fields) < 2:
                    raise EvalFormatError(
                        f"{path}:{lineno}: need a subject id and at least one image id"
                    )
                if fields[0] in templates:
                    raise EvalFormatError(f"{path}:{lineno}: duplicate template {fields[0]!r}")
                templates[fields[0]] = Template(fields[0], tuple(fields[1:]))
    except OSError as exc:
        raise EvalFormatError(f"cannot read templates {path}: {exc}") from exc
    if not templates:
        raise EvalFormatError(f"{path}: no templates found")
    return templates


def roc_to_csv(curve: RocCurve) -> str:
    lines = ["threshold,far,tar"]
    lines += [f"{t!r},{f!r},{a!r}" for t, f, a in curve.points()]
    return "\n".join(lines) + "\n"
