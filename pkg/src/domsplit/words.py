"""Word products over a finite matrix family: gap enumeration and verdicts.

A word is a tuple of member indices; ``product(w) = M[w[0]] @ M[w[1]] @ ...``
left to right as written.

Long products are never trusted in raw form.  Singular values of a product
come from exterior-power (compound-matrix) accumulations: for each order k
the compound product is renormalized as it grows, with the magnitude carried
as an accumulated logarithm, and ``log sigma_k = log |wedge^k P| -
log |wedge^(k-1) P|``.  This keeps gap ratios accurate far beyond the length
where the small singular values of a directly formed product drown in
rounding.  The plain-matrix path (needed for singular frames) rescales every
``RESCALE_PERIOD`` multiplications.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
Word = tuple[int, ...]

RESCALE_PERIOD = 16


# ---------------------------------------------------------------------------
# family


@dataclass(frozen=True)
class FamilySource:
    """Where a family came from; sampled curves carry their sampling density."""

    kind: str = "explicit"  # "explicit" | "sampled_curve"
    description: str = ""
    sample_count: int | None = None

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "description": self.description, "sample_count": self.sample_count}

    @classmethod
    def from_json_dict(cls, data: dict) -> "FamilySource":
        return cls(
            kind=data.get("kind", "explicit"),
            description=data.get("description", ""),
            sample_count=data.get("sample_count"),
        )


@dataclass(frozen=True, eq=False)
class MatrixFamily:
    """Non-empty labeled set of invertible matrices of one common dimension.

    For a family generated by sampling a parametric curve, members are kept
    in curve order so adjacent-sample discrepancies can be measured.
    """

    members: tuple[tuple[str, np.ndarray], ...]
    source: FamilySource = field(default_factory=FamilySource)

    def __post_init__(self):
        members = tuple((str(label), linalg.check_invertible(M, label=str(label))) for label, M in self.members)
        if not members:
            raise ValueError("family must have at least one member")
        dims = {M.shape[0] for _, M in members}
        if len(dims) != 1:
            raise ValueError("all members must share one dimension")
        labels = [label for label, _ in members]
        if len(set(labels)) != len(labels):
            raise ValueError("member labels must be unique")
        frozen = []
        for label, M in members:
            M = np.ascontiguousarray(M)
            M.setflags(write=False)
            frozen.append((label, M))
        object.__setattr__(self, "members", tuple(frozen))

    @classmethod
    def from_matrices(cls, matrices, labels=None, source: FamilySource | None = None) -> "MatrixFamily":
        mats = [np.asarray(M, dtype=float) for M in matrices]
        if labels is None:
            labels = [f"M{j}" for j in range(len(mats))]
        return cls(members=tuple(zip(labels, mats)), source=source or FamilySource())

    @property
    def dim(self) -> int:
        return self.members[0][1].shape[0]

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.members)

    @property
    def matrices(self) -> tuple[np.ndarray, ...]:
        return tuple(M for _, M in self.members)

    def matrix(self, index: int) -> np.ndarray:
        return self.members[index][1]

    def inverse(self) -> "MatrixFamily":
        return MatrixFamily(
            members=tuple((f"{label}^-1", np.linalg.inv(M)) for label, M in self.members),
            source=self.source,
        )

    def word_labels(self, word: Word) -> tuple[str, ...]:
        return tuple(self.members[j][0] for j in word)


def perturb_family(family: MatrixFamily, noise: float, seed: int, copies: int = 1) -> MatrixFamily:
    """Entrywise uniform(-noise, noise) perturbation of every member.

    With ``copies > 1`` each member yields that many independently perturbed
    variants.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    members = []
    for label, M in family.members:
        for c in range(copies):
            pert = M + rng.uniform(-noise, noise, size=M.shape)
            suffix = "~" if copies == 1 else f"~{c}"
            members.append((label + suffix, pert))
    return MatrixFamily(members=tuple(members), source=family.source)


def _validate_word(family: MatrixFamily, word) -> Word:
    w = tuple(int(j) for j in word)
    if len(w) == 0:
        raise ValueError("word must be non-empty")
    if any(j < 0 or j >= family.size for j in w):
        raise ValueError("word contains an invalid member index")
    return w


# ---------------------------------------------------------------------------
# products

def compound_matrix(matrix, k: int) -> np.ndarray:
    """k-th compound: minors indexed by lexicographic k-subsets.

    Satisfies compound(A @ B) = compound(A) @ compound(B), so compound
    accumulation tracks exterior-power norms of long products exactly.
    """
    M = linalg.as_square(matrix)
    d = M.shape[0]
    if not 1 <= k <= d:
        raise ValueError(f"k must be in 1..{d}, got {k}")
    if k == 1:
        return M.copy()
    subsets = np.array(list(itertools.combinations(range(d), k)))
    blocks = M[subsets[:, None, :, None], subsets[None, :, None, :]]
    return np.linalg.det(blocks)


def word_product(family: MatrixFamily, word) -> np.ndarray:
    """Plain left-to-right product; only safe for short words."""
    w = _validate_word(family, word)
    P = np.eye(family.dim)
    for j in w:
        P = P @ family.matrix(j)
    return P


def scaled_word_product(family: MatrixFamily, word) -> tuple[np.ndarray, float]:
    """Product in the form ``exp(log_scale) * P_hat`` with ``|P_hat|_F = 1``.

    Rescales every RESCALE_PERIOD multiplications so entries never overflow
    or underflow for long words.
    """
    w = _validate_word(family, word)
    P = np.eye(family.dim)
    log_scale = 0.0
    for step, j in enumerate(w, start=1):
        P = P @ family.matrix(j)
        if step % RESCALE_PERIOD == 0:
            s = float(np.linalg.norm(P))
            P = P / s
            log_scale += math.log(s)
    s = float(np.linalg.norm(P))
    return P / s, log_scale + math.log(s)


def log_singular_value_prefixes(family: MatrixFamily, word) -> np.ndarray:
    """``out[n, j] = log sigma_{j+1}(product(word[:n]))`` for n = 0..len(word).

    Computed through compound accumulations of every order, renormalized at
    each step; row 0 is all zeros (the identity).
    """
    w = _validate_word(family, word)
    d = family.dim
    comps = {k: [compound_matrix(M, k) for M in family.matrices] for k in range(1, d + 1)}
    acc = {k: np.eye(math.comb(d, k)) for k in range(1, d + 1)}
    logs = {k: 0.0 for k in range(1, d + 1)}
    out = np.zeros((len(w) + 1, d))
    for n, j in enumerate(w, start=1):
        top = np.zeros(d + 1)
        for k in range(1, d + 1):
            acc[k] = acc[k] @ comps[k][j]
            s = float(np.linalg.norm(acc[k]))
            acc[k] /= s
            logs[k] += math.log(s)
            sigma1 = float(np.linalg.svd(acc[k], compute_uv=False)[0])
            top[k] = logs[k] + math.log(sigma1)
        out[n] = np.diff(top)
    return out


def log_singular_value_suffixes(family: MatrixFamily, word) -> np.ndarray:
    """``out[n, j] = log sigma_{j+1}(product(word[-n:]))`` for n = 0..len(word).

    Suffix products are the nested forward maps at a fixed anchor point:
    each step multiplies the next matrix on the left.
    """
    w = _validate_word(family, word)
    d = family.dim
    comps = {k: [compound_matrix(M, k) for M in family.matrices] for k in range(1, d + 1)}
    acc = {k: np.eye(math.comb(d, k)) for k in range(1, d + 1)}
    logs = {k: 0.0 for k in range(1, d + 1)}
    out = np.zeros((len(w) + 1, d))
    for n, j in enumerate(reversed(w), start=1):
        top = np.zeros(d + 1)
        for k in range(1, d + 1):
            acc[k] = comps[k][j] @ acc[k]
            s = float(np.linalg.norm(acc[k]))
            acc[k] /= s
            logs[k] += math.log(s)
            sigma1 = float(np.linalg.svd(acc[k], compute_uv=False)[0])
            top[k] = logs[k] + math.log(sigma1)
        out[n] = np.diff(top)
    return out


def log_singular_values(family: MatrixFamily, word) -> np.ndarray:
    """Logs of all singular values of the word product, sorted non-increasing."""
    return log_singular_value_prefixes(family, word)[-1]


def log_gap_ratio(family: MatrixFamily, word, index: int) -> float:
    """``log(sigma_{index+1}/sigma_index)`` of the word product, 1-based index."""
    d = family.dim
    if not 1 <= index <= d - 1:
        raise ValueError(f"index must be in 1..{d - 1}, got {index}")
    logs = log_singular_values(family, word)
    return float(logs[index] - logs[index - 1])


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class GapLengthStat:
    """Worst (largest) log gap ratio over the words examined at one length."""

    length: int
    max_log_ratio: float
    words_examined: int
    exact: bool
    witness: Word

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "max_log_ratio": self.max_log_ratio,
            "words_examined": self.words_examined,
            "exact": self.exact,
            "witness": list(self.witness),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GapLengthStat":
        return cls(
            length=int(data["length"]),
            max_log_ratio=float(data["max_log_ratio"]),
            words_examined=int(data["words_examined"]),
            exact=bool(data["exact"]),
            witness=tuple(int(j) for j in data["witness"]),
        )


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line ``log_C + N * log_tau`` through the per-length maxima."""

    log_C: float
    log_tau: float
    residual: float

    def to_json_dict(self) -> dict:
        return {"log_C": self.log_C, "log_tau": self.log_tau, "residual": self.residual}

    @classmethod
    def from_json_dict(cls, data: dict) -> "DecayFit":
        return cls(float(data["log_C"]), float(data["log_tau"]), float(data["residual"]))


DOMINATED = "dominated"
NOT_DOMINATED = "not_dominated"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    kind: str
    witness: Word | None = None
    reason: str | None = None

    def to_json_dict(self, labels: tuple[str, ...] | None = None) -> dict:
        data = {"kind": self.kind, "witness": None if self.witness is None else list(self.witness), "reason": self.reason}
        if labels is not None and self.witness is not None:
            data["witness_labels"] = [labels[j] for j in self.witness]
        return data

    @classmethod
    def from_json_dict(cls, data: dict) -> "Verdict":
        w = data.get("witness")
        return cls(
            kind=data["kind"],
            witness=None if w is None else tuple(int(j) for j in w),
            reason=data.get("reason"),
        )


@dataclass(frozen=True)
class GapReport:
    """Per-length gap maxima, fitted decay, and the domination verdict."""

    index: int
    family_dim: int
    family_labels: tuple[str, ...]
    family_source: FamilySource
    per_length: tuple[GapLengthStat, ...]
    fit: DecayFit | None = None
    verdict: Verdict | None = None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "family": {
                "dim": self.family_dim,
                "labels": list(self.family_labels),
                "source": self.family_source.to_json_dict(),
            },
            "per_length": [s.to_json_dict() for s in self.per_length],
            "fit": None if self.fit is None else self.fit.to_json_dict(),
            "verdict": None if self.verdict is None else self.verdict.to_json_dict(self.family_labels),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GapReport":
        fam = data["family"]
        return cls(
            index=int(data["index"]),
            family_dim=int(fam["dim"]),
            family_labels=tuple(fam["labels"]),
            family_source=FamilySource.from_json_dict(fam["source"]),
            per_length=tuple(GapLengthStat.from_json_dict(s) for s in data["per_length"]),
            fit=None if data.get("fit") is None else DecayFit.from_json_dict(data["fit"]),
            verdict=None if data.get("verdict") is None else Verdict.from_json_dict(data["verdict"]),
        )

    def csv_rows(self) -> list[list[str]]:
        rows = [["N", "max_log_ratio", "words_examined", "exact"]]
        for s in self.per_length:
            rows.append([str(s.length), repr(s.max_log_ratio), str(s.words_examined), "true" if s.exact else "false"])
        return rows


@dataclass(frozen=True)
class LyapunovEstimate:
    """Per-step log growth rates of singular values along one word."""

    exponents: tuple[float, ...]
    word_length: int


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for gap enumeration and the domination verdict.

    Words are enumerated exhaustively while ``|family|^N <= budget``; beyond
    that a beam keeps the ``beam_width`` worst (largest) gap-ratio words per
    length and extends only those, so the bias is toward not certifying
    domination falsely.  A Dominated verdict needs the fitted slope below
    ``-dominated_margin`` with residual below ``residual_bound`` and every
    per-length maximum under the fitted line (slope slackened by
    ``margin_slack``).  A NotDominated verdict needs a periodic witness whose
    powers all keep a gap ratio at or above ``ratio_floor``.
    """

    max_len: int = 12
    budget: int = 250_000
    beam_width: int = 1024
    tail_fraction: float = 0.5
    dominated_margin: float = 0.01
    residual_bound: float = 0.05
    margin_slack: float = 0.1
    ratio_floor: float = 0.1
    min_witness_powers: int = 2
    chunk_size: int = 65536


# ---------------------------------------------------------------------------
# enumeration


class _GapSearch:
    """Breadth-wise enumeration with compound-matrix beam states."""

    def __init__(self, family: MatrixFamily, index: int, config: SearchConfig):
        d = family.dim
        if not 1 <= index <= d - 1:
            raise ValueError(f"index must be in 1..{d - 1}, got {index}")
        self.family = family
        self.index = index
        self.config = config
        self.ks = tuple(k for k in (index - 1, index, index + 1) if 1 <= k <= d)
        self.bank = {
            k: np.stack([compound_matrix(M, k) for M in family.matrices]) for k in self.ks
        }

    def _log_gaps(self, mats: dict[int, np.ndarray], logs: dict[int, np.ndarray]) -> np.ndarray:
        tops = {}
        for k in self.ks:
            sigma1 = np.linalg.svd(mats[k], compute_uv=False)[..., 0]
            tops[k] = logs[k] + np.log(sigma1)
        i = self.index
        low = tops[i - 1] if i - 1 >= 1 else 0.0
        return tops[i + 1] + low - 2.0 * tops[i]

    def run(self, max_len: int, budget: int) -> list[GapLengthStat]:
        m = self.family.size
        cfg = self.config
        if budget < m:
            raise ValueError(f"budget ({budget}) is below the family size ({m})")
        if max_len < 2:
            raise ValueError("max_len must be at least 2")

        words = np.zeros((1, 0), dtype=np.int32)
        mats = {k: np.eye(self.bank[k].shape[1])[None].copy() for k in self.ks}
        logs = {k: np.zeros(1) for k in self.ks}
        scores = np.zeros(1)
        complete = True

        stats: list[GapLengthStat] = []
        for length in range(1, max_len + 1):
            count = words.shape[0]
            exact = complete and count * m <= budget
            if count * m > budget and count > cfg.beam_width:
                keep = np.argsort(-scores, kind="stable")[: cfg.beam_width]
                words = words[keep]
                mats = {k: mats[k][keep] for k in self.ks}
                logs = {k: logs[k][keep] for k in self.ks}
                count = words.shape[0]

            new_words = []
            new_mats = {k: [] for k in self.ks}
            new_logs = {k: [] for k in self.ks}
            new_scores = []
            best_val = -math.inf
            best_word: Word = ()
            examined = 0
            letters = np.arange(m, dtype=np.int32)
            for lo in range(0, count, cfg.chunk_size):
                sl = slice(lo, min(lo + cfg.chunk_size, count))
                n_par = sl.stop - sl.start
                cw = np.concatenate(
                    [
                        np.repeat(words[sl], m, axis=0),
                        np.tile(letters, n_par)[:, None],
                    ],
                    axis=1,
                )
                cm = {}
                cl = {}
                for k in self.ks:
                    prod = np.matmul(mats[k][sl][:, None], self.bank[k][None])
                    prod = prod.reshape(n_par * m, *prod.shape[2:])
                    nrm = np.linalg.norm(prod, axis=(-2, -1))
                    prod /= nrm[:, None, None]
                    cm[k] = prod
                    cl[k] = np.repeat(logs[k][sl], m) + np.log(nrm)
                cs = self._log_gaps(cm, cl)
                examined += cs.size
                arg = int(np.argmax(cs))
                if cs[arg] > best_val:
                    best_val = float(cs[arg])
                    best_word = tuple(int(j) for j in cw[arg])
                new_words.append(cw)
                for k in self.ks:
                    new_mats[k].append(cm[k])
                    new_logs[k].append(cl[k])
                new_scores.append(cs)

            words = np.concatenate(new_words, axis=0)
            mats = {k: np.concatenate(new_mats[k], axis=0) for k in self.ks}
            logs = {k: np.concatenate(new_logs[k], axis=0) for k in self.ks}
            scores = np.concatenate(new_scores)
            complete = exact
            stats.append(
                GapLengthStat(
                    length=length,
                    max_log_ratio=best_val,
                    words_examined=examined,
                    exact=exact,
                    witness=best_word,
                )
            )
        return stats


def enumerate_gaps(
    family: MatrixFamily,
    index: int,
    max_len: int | None = None,
    budget: int | None = None,
    config: SearchConfig | None = None,
) -> GapReport:
    """Per-length worst gap ratios (fit and verdict left empty).

    Exhaustive while the word count fits the budget, beam search beyond;
    deterministic for a fixed configuration.
    """
    cfg = config or SearchConfig()
    search = _GapSearch(family, index, cfg)
    stats = search.run(max_len or cfg.max_len, budget or cfg.budget)
    return GapReport(
        index=index,
        family_dim=family.dim,
        family_labels=family.labels,
        family_source=family.source,
        per_length=tuple(stats),
    )


def fit_decay(report: GapReport, tail_fraction: float = 0.5) -> GapReport:
    """Least-squares exponential-decay fit over the final fraction of lengths."""
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    if len(report.per_length) < 4:
        raise ValueError("need at least 4 per-length entries to fit a decay")
    n_tail = max(2, math.ceil(tail_fraction * len(report.per_length)))
    tail = report.per_length[-n_tail:]
    x = np.array([s.length for s in tail], dtype=float)
    y = np.array([s.max_log_ratio for s in tail])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (intercept + slope * x)) ** 2)))
    return replace(report, fit=DecayFit(log_C=float(intercept), log_tau=float(slope), residual=resid))


def _primitive_root(word: Word) -> Word:
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word == word[:p] * (n // p):
            return word[:p]
    return word


def _periodic_witness(
    family: MatrixFamily, index: int, report: GapReport, config: SearchConfig
) -> Word | None:
    """First candidate word whose powers all stay at or above the ratio floor.

    Candidates are the single letters followed by the per-length worst words
    (reduced to their primitive roots); a single flat length is never enough,
    the flatness must survive at least ``min_witness_powers`` powers.
    """
    max_len = report.per_length[-1].length
    log_floor = math.log(config.ratio_floor)
    candidates: list[Word] = [(j,) for j in range(family.size)]
    candidates += [s.witness for s in report.per_length]
    seen = set()
    for cand in candidates:
        root = _primitive_root(cand)
        if root in seen:
            continue
        seen.add(root)
        n_powers = max_len // len(root)
        if n_powers < config.min_witness_powers:
            continue
        flat = True
        for k in range(1, n_powers + 1):
            if log_gap_ratio(family, root * k, index) < log_floor:
                flat = False
                break
        if flat:
            return root
    return None


def is_dominated(family: MatrixFamily, index: int, config: SearchConfig | None = None) -> GapReport:
    """Gap enumeration, decay fit, and a three-way domination verdict.

    A periodic flat witness wins over the fit (constructive evidence beats
    extrapolation); Inconclusive is an explicit outcome with a reason.
    """
    cfg = config or SearchConfig()
    report = fit_decay(enumerate_gaps(family, index, config=cfg), cfg.tail_fraction)
    witness = _periodic_witness(family, index, report, cfg)
    if witness is not None:
        verdict = Verdict(kind=NOT_DOMINATED, witness=witness)
    else:
        fit = report.fit
        problems = []
        if not fit.log_tau < -cfg.dominated_margin:
            problems.append(
                f"fitted log_tau {fit.log_tau:.4f} is not below -{cfg.dominated_margin}"
            )
        # per-length wobble grows with the decay rate, so the residual bound
        # scales with the slope magnitude (near-flat slopes keep the strict bound)
        resid_bound = cfg.residual_bound * max(1.0, -fit.log_tau)
        if not fit.residual < resid_bound:
            problems.append(f"fit residual {fit.residual:.4f} exceeds {resid_bound:.4f}")
        for s in report.per_length:
            bound = fit.log_C + s.length * (fit.log_tau + cfg.margin_slack)
            if s.max_log_ratio > bound:
                problems.append(
                    f"length {s.length} maximum {s.max_log_ratio:.4f} exceeds fitted decay line"
                )
                break
        if problems:
            verdict = Verdict(kind=INCONCLUSIVE, reason="; ".join(problems))
        else:
            verdict = Verdict(kind=DOMINATED)
    return replace(report, verdict=verdict)


# ---------------------------------------------------------------------------
# diagnostics


def lyapunov_estimates(family: MatrixFamily, word) -> LyapunovEstimate:
    """Finite-word growth rates: ``(1/N) log sigma_j(product(word))``."""
    w = _validate_word(family, word)
    logs = log_singular_values(family, w) / len(w)
    logs = np.sort(logs)[::-1]  # guard 1e-15 inversions from the log differences
    return LyapunovEstimate(exponents=tuple(float(x) for x in logs), word_length=len(w))


def birkhoff_gap(family: MatrixFamily, word, e, f) -> float:
    """Per-step log ratio ``(1/N) log(|P f| / |P e|)`` for the word product.

    Negative values mean the direction ``f`` is outgrown by ``e``; for a
    dominated family this is uniformly negative once words are long enough.
    """
    w = _validate_word(family, word)
    ev = np.asarray(e, dtype=float).ravel()
    fv = np.asarray(f, dtype=float).ravel()
    if np.linalg.norm(ev) == 0.0 or np.linalg.norm(fv) == 0.0:
        raise ValueError("directions must be non-zero")
    P, _ = scaled_word_product(family, w)  # common scale cancels in the ratio
    with np.errstate(divide="ignore"):
        num = np.log(np.linalg.norm(P @ (fv / np.linalg.norm(fv))))
        den = np.log(np.linalg.norm(P @ (ev / np.linalg.norm(ev))))
    return float((num - den) / len(w))
