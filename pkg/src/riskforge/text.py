"""Note text to reduced numeric features.

Per-admission note selection, tokenization against an embedded stopword
list (clinical negators deliberately retained), capped-vocabulary TF-IDF,
and variance-targeted dimensionality reduction: truncated SVD for the
sparse term weights (no centering), PCA for dense note embeddings
(column-mean centering). Admissions without a note get exact zero vectors
in the reduced space plus a presence indicator column.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, EmptyCorpus
from .frame import PatientFrame

# 174 common English function words; negation terms ("no", "not", "nor")
# are kept out because they carry prognostic signal in clinical narrative.
STOPWORDS = frozenset("""
a about above after again against all although always am among amongst an
and another any anyhow anything anywhere are around as at away be because
been before being below beside besides between beyond both but by can
cannot could d despite did do does doing down during each either else
elsewhere enough even ever every everything everywhere few for from further
had has have having he her here hers herself him himself his how however i
if in indeed instead into is it its itself just ll m ma many maybe me
meanwhile might more moreover most must my myself now o of off on once only
onto or other our ours ourselves out over own per re s same shall she
should since so some such t than that the their theirs them themselves then
there these they this those through to too under until up upon us ve very
via was we were what when where which while who whom why will with within
would y you your yours yourself yourselves
""".split())


@dataclass
class NoteRecord:
    hadm_id: int
    kind: str
    charttime: float
    text: str


@dataclass
class CoverageReport:
    kind: str
    covered: int
    total: int

    @property
    def fraction(self):
        return self.covered / self.total if self.total else 0.0

    def __str__(self):
        return f"{self.kind} {self.covered} ({100.0 * self.fraction:.1f}%)"


def select_notes(notes, cohort, kind):
    """At most one note per cohort admission: the earliest charttime.

    Returns (records sorted by hadm_id, CoverageReport).
    """
    cohort_hadm = {int(h) for h in cohort.values("hadm_id")}
    hadm, hmask = notes.column("hadm_id")
    ct, cmask = notes.column("charttime")
    text = notes.values("text")
    best = {}
    for r in range(notes.n_rows):
        if hmask[r]:
            continue
        h = int(hadm[r])
        if h not in cohort_hadm:
            continue
        t = math.inf if cmask[r] else float(ct[r])
        cand = (t, r)
        if h not in best or cand < best[h]:
            best[h] = cand
    records = [NoteRecord(h, kind, best[h][0], str(text[best[h][1]]))
               for h in sorted(best)]
    return records, CoverageReport(kind, len(records), len(cohort_hadm))


def normalize_text(text):
    """Lowercase, strip punctuation/digits (and ___ placeholders), drop stopwords."""
    chars = [c if c.isalpha() else " " for c in text.lower()]
    tokens = "".join(chars).split()
    return [t for t in tokens if t not in STOPWORDS]


@dataclass
class TfidfModel:
    vocabulary: list
    idf: np.ndarray
    df: np.ndarray
    n_docs: int

    def index(self):
        return {t: i for i, t in enumerate(self.vocabulary)}


def fit_tfidf(docs, max_terms=500):
    """Vocabulary of the ``max_terms`` highest-document-frequency terms.

    Ties break lexicographically. idf(t) = ln((1+N)/(1+df(t))) + 1.
    """
    n_docs = len(docs)
    if n_docs == 0 or all(len(d) == 0 for d in docs):
        raise EmptyCorpus("no non-empty documents")
    df = {}
    for doc in docs:
        for t in set(doc):
            df[t] = df.get(t, 0) + 1
    ranked = sorted(df, key=lambda t: (-df[t], t))[:max_terms]
    dfv = np.array([df[t] for t in ranked], dtype=float)
    idf = np.log((1.0 + n_docs) / (1.0 + dfv)) + 1.0
    return TfidfModel(ranked, idf, dfv, n_docs)


def transform_tfidf(model, doc):
    """tf*idf weights, L2-normalized; OOV tokens ignored; empty -> zeros."""
    index = model.index()
    vec = np.zeros(len(model.vocabulary))
    for t in doc:
        j = index.get(t)
        if j is not None:
            vec[j] += 1.0
    vec *= model.idf
    norm = float(np.linalg.norm(vec))
    if norm > 0:
        vec /= norm
    return vec


def corpus_matrix(model, docs):
    return np.vstack([transform_tfidf(model, d) for d in docs]) if docs else \
        np.zeros((0, len(model.vocabulary)))


@dataclass
class ReducedBasis:
    kind: str                 # "svd" | "pca"
    components: np.ndarray    # retained x d, orthonormal rows
    explained_ratio: np.ndarray
    center: np.ndarray        # None for svd
    retained: int

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if self.center is not None:
            X = X - self.center
        return X @ self.components.T


def _subspace_svd(M, k, tol, max_iter):
    """Randomized subspace iteration; converges the top-k singular values.

    The working subspace is oversampled past k so clustered singular values
    near the cut do not stall convergence; the tolerance is checked on the
    k values actually returned.
    """
    n, d = M.shape
    max_rank = min(n, d)
    k = min(k, max_rank)
    ks = min(k + max(10, k // 2), max_rank)
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(M @ rng.standard_normal((d, ks)))
    prev = None
    for _ in range(max_iter):
        Q, _ = np.linalg.qr(M.T @ Q)
        Q, _ = np.linalg.qr(M @ Q)
        B = Q.T @ M
        s = np.linalg.svd(B, compute_uv=False)[:k]
        if prev is not None and prev.shape == s.shape:
            # values at float-dust level (exactly low-rank inputs) count as
            # settled; their variance share is ~1e-14 so the floor cannot
            # move a retained-count decision
            floor = max(float(s[0]) * 1e-7, 1e-300)
            denom = np.maximum(prev, floor)
            if float(np.max(np.abs(s - prev) / denom)) < tol:
                _, s_fin, Vt = np.linalg.svd(B, full_matrices=False)
                return s_fin[:k], Vt[:k]
        prev = s
    raise ConvergenceFailure(f"subspace iteration did not settle in {max_iter} rounds")


def fit_reduced_basis(matrix, kind, target_variance, *, tol=1e-8, max_iter=300):
    """Smallest orthonormal basis explaining >= target_variance.

    ``svd`` factors the raw matrix; ``pca`` removes column means first.
    Retained count is the smallest k whose cumulative explained variance
    reaches the target.
    """
    if not 0.0 < target_variance <= 1.0:
        raise ValueError("target_variance must be in (0, 1]")
    M = np.asarray(matrix, dtype=float)
    if M.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    center = None
    if kind == "pca":
        center = M.mean(axis=0)
        M = M - center
    elif kind != "svd":
        raise ValueError(f"unknown reduction kind {kind!r}")

    total = float(np.sum(M * M))
    if total <= 0.0:
        raise ConvergenceFailure("matrix has no variance to explain")
    max_rank = min(M.shape)
    k = min(8, max_rank)
    while True:
        s, Vt = _subspace_svd(M, k, tol, max_iter)
        ratios = (s * s) / total
        cum = np.cumsum(ratios)
        hit = np.flatnonzero(cum >= target_variance - 1e-9)
        if hit.size:
            r = int(hit[0] + 1)
            return ReducedBasis(kind, Vt[:r].copy(), ratios[:r].copy(), center, r)
        if k >= max_rank:
            # numerical dust kept the cumulative sum under target; keep all
            return ReducedBasis(kind, Vt.copy(), ratios.copy(), center, int(k))
        k = min(2 * k, max_rank)


TEXT_BLOCKS = (
    ("disch_tfidf_svd", "tfidf", "discharge"),
    ("radio_tfidf_svd", "tfidf", "radiology"),
    ("discharge_bert_pca", "embedding", "discharge"),
    ("radiology_bert_pca", "embedding", "radiology"),
)


def apply_text_block(cohort, blocks):
    """Append reduced text features to the cohort, zero-filling absent notes.

    ``blocks`` maps a column prefix to (hadm_id -> reduced vector, dim).
    Missing-note zero vectors live in the reduced space, so they project to
    exactly zero regardless of centering. Adds has_discharge_note /
    has_radiology_note indicators.
    """
    hadm = cohort.values("hadm_id").astype(int)
    out = cohort.select(["hadm_id"])
    presence = {"discharge": np.zeros(len(hadm)), "radiology": np.zeros(len(hadm))}
    for prefix, _, modality in TEXT_BLOCKS:
        if prefix not in blocks:
            continue
        vectors, dim = blocks[prefix]
        mat = np.zeros((len(hadm), dim))
        for i, h in enumerate(hadm.tolist()):
            vec = vectors.get(h)
            if vec is not None:
                mat[i] = vec
                presence[modality][i] = 1.0
        for j in range(dim):
            out = out.with_column(f"{prefix}_{j + 1}", "num", mat[:, j])
    out = out.with_column("has_discharge_note", "int", presence["discharge"])
    out = out.with_column("has_radiology_note", "int", presence["radiology"])
    return out


def save_basis(basis, path):
    """Write a ReducedBasis as CSV (center row first when present)."""
    import csv as _csv

    d = basis.components.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["role", "index", "explained_ratio"] +
                        [f"v{j}" for j in range(d)])
        if basis.center is not None:
            writer.writerow(["center", 0, repr(0.0)] +
                            [repr(float(v)) for v in basis.center])
        for i in range(basis.retained):
            writer.writerow(["component", i + 1, repr(float(basis.explained_ratio[i]))] +
                            [repr(float(v)) for v in basis.components[i]])


def load_basis(path, kind=None):
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        d = len(header) - 3
        center = None
        comps, ratios = [], []
        for row in reader:
            vec = np.array([float(v) for v in row[3:]], dtype=float)
            if row[0] == "center":
                center = vec
            else:
                comps.append(vec)
                ratios.append(float(row[2]))
    components = np.vstack(comps) if comps else np.zeros((0, d))
    if kind is None:
        kind = "pca" if center is not None else "svd"
    return ReducedBasis(kind, components, np.array(ratios), center, len(comps))


def read_embeddings(path):
    """CSV of hadm_id + dense embedding columns -> (hadm->vector dict, dim)."""
    import csv as _csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header[0] != "hadm_id":
            raise ValueError(f"{path}: first column must be hadm_id")
        dim = len(header) - 1
        out = {}
        for row in reader:
            out[int(float(row[0]))] = np.array([float(v) for v in row[1:]], dtype=float)
    return out, dim
