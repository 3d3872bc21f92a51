"""YAML documents describing model classes, mixtures and priors.

A document is a mapping with these keys (anything else is rejected)::

    kind: model-class | mixture | prior
    id: free text
    alphabet: 2
    members:                # either members ...
      - family: bernoulli
        p: 0.25
        weight: 0.5         # optional; mixture and prior documents require it
    random:                 # ... or a seeded generator (model-class only)
      kind: bernoulli
      size: 16
      seed: 3
    smooth: false           # mixture only: average with the uniform measure
    provenance: {}          # free-form, preserved verbatim

Member families and their parameters:

``uniform`` (none), ``kt`` (none), ``bernoulli`` (``p``), ``iid`` (``theta``),
``markov`` (``initial``, ``transition``), ``dirac`` (``prefix``, ``period``),
``switching_kt`` (``alpha_hat``), ``mixture`` (``members``, optional ``tag``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from seqmix.errors import ConfigError, SeqmixError
from seqmix.families import SwitchingKT
from seqmix.measures import (
    Dirac,
    FiniteMixture,
    IIDCategorical,
    KTEstimator,
    MarkovChain,
    ProcessMeasure,
    UniformIID,
    mix_with_uniform,
    random_class,
)

KINDS = ("model-class", "mixture", "prior")
TOP_KEYS = {"kind", "id", "alphabet", "members", "random", "smooth", "provenance"}
RANDOM_KEYS = {"kind", "size", "seed"}
FAMILY_KEYS = {
    "uniform": set(),
    "kt": set(),
    "bernoulli": {"p"},
    "iid": {"theta"},
    "markov": {"initial", "transition"},
    "dirac": {"prefix", "period"},
    "switching_kt": {"alpha_hat"},
    "mixture": {"members", "tag"},
}
REQUIRED = {
    "bernoulli": {"p"},
    "iid": {"theta"},
    "markov": {"initial", "transition"},
    "switching_kt": {"alpha_hat"},
    "mixture": {"members"},
}


@dataclass
class ModelDocument:
    kind: str
    alphabet: int
    members: list[ProcessMeasure]
    weights: list[float] | None = None
    id: str = ""
    smooth: bool = False
    provenance: dict = field(default_factory=dict)

    def measure(self) -> ProcessMeasure:
        """The mixture a ``mixture`` or ``prior`` document describes."""
        if self.weights is None:
            raise ConfigError(f"document {self.id!r} carries no weights")
        mix = FiniteMixture(list(zip(self.weights, self.members)), tag=self.id or None)
        return mix_with_uniform(mix) if self.smooth else mix


def _check_keys(where: str, got, allowed: set, required: set = frozenset()):
    if not isinstance(got, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(got).__name__}")
    unknown = set(got) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(got)
    if missing:
        raise ConfigError(f"{where}: missing key(s) {sorted(missing)}")


def _number(where: str, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _int(where: str, v, lo: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{where}: must be >= {lo}, got {v}")
    return v


def _symbols(where: str, v) -> list[int]:
    if isinstance(v, str):
        if v and not v.isdigit():
            raise ConfigError(f"{where}: digit string expected, got {v!r}")
        return [int(c) for c in v]
    if not isinstance(v, list):
        raise ConfigError(f"{where}: expected a list of symbols")
    return [_int(where, s, 0) for s in v]


def _member(where: str, d: dict, A: int) -> tuple[ProcessMeasure, float | None]:
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError(f"{where}: member needs a 'family' key")
    fam = d["family"]
    if fam not in FAMILY_KEYS:
        raise ConfigError(f"{where}: unknown family {fam!r}; known: {sorted(FAMILY_KEYS)}")
    _check_keys(where, d, FAMILY_KEYS[fam] | {"family", "weight"}, REQUIRED.get(fam, set()))
    w = None
    if "weight" in d:
        w = _number(f"{where}.weight", d["weight"])
        if not (w > 0 and math.isfinite(w)):
            raise ConfigError(f"{where}.weight: must be positive")
    try:
        if fam == "uniform":
            m = UniformIID(A)
        elif fam == "kt":
            m = KTEstimator(A)
        elif fam == "bernoulli":
            if A != 2:
                raise ConfigError(f"{where}: bernoulli needs alphabet 2")
            p = _number(f"{where}.p", d["p"])
            m = IIDCategorical([1.0 - p, p])
        elif fam == "iid":
            theta = [_number(f"{where}.theta", t) for t in d["theta"]]
            m = IIDCategorical(theta)
        elif fam == "markov":
            init = [_number(f"{where}.initial", t) for t in d["initial"]]
            trans = [[_number(f"{where}.transition", t) for t in row] for row in d["transition"]]
            m = MarkovChain(init, trans)
        elif fam == "dirac":
            m = Dirac(_symbols(f"{where}.prefix", d.get("prefix", [])),
                      _symbols(f"{where}.period", d.get("period", [0])), A)
        elif fam == "switching_kt":
            m = SwitchingKT(_number(f"{where}.alpha_hat", d["alpha_hat"]), A)
        else:
            subs = _members(f"{where}.members", d["members"], A, need_weights=True)
            tag = d.get("tag")
            if tag is not None and not isinstance(tag, str):
                raise ConfigError(f"{where}.tag: expected text")
            m = FiniteMixture([(w_, mu) for mu, w_ in subs], tag=tag)
    except ConfigError:
        raise
    except (SeqmixError, TypeError, KeyError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    if m.A != A:
        raise ConfigError(f"{where}: alphabet {m.A} does not match document alphabet {A}")
    return m, w


def _members(where: str, items, A: int, need_weights: bool) -> list[tuple[ProcessMeasure, float | None]]:
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{where}: expected a non-empty list")
    out = [_member(f"{where}[{i}]", d, A) for i, d in enumerate(items)]
    has = [w is not None for _, w in out]
    if need_weights and not all(has):
        raise ConfigError(f"{where}: every member needs a weight")
    if any(has) and not all(has):
        raise ConfigError(f"{where}: weights must be given for all members or none")
    return out


def parse(doc: Any, where: str = "document") -> ModelDocument:
    """Validate a loaded mapping and build its measures."""
    _check_keys(where, doc, TOP_KEYS, {"kind", "alphabet"})
    kind = doc["kind"]
    if kind not in KINDS:
        raise ConfigError(f"{where}.kind: expected one of {KINDS}, got {kind!r}")
    A = _int(f"{where}.alphabet", doc["alphabet"], 2)
    if A > 256:
        raise ConfigError(f"{where}.alphabet: at most 256")
    ident = doc.get("id", "")
    if not isinstance(ident, str):
        raise ConfigError(f"{where}.id: expected text")
    prov = doc.get("provenance", {})
    if not isinstance(prov, dict):
        raise ConfigError(f"{where}.provenance: expected a mapping")
    smooth = doc.get("smooth", False)
    if not isinstance(smooth, bool):
        raise ConfigError(f"{where}.smooth: expected true or false")
    if smooth and kind != "mixture":
        raise ConfigError(f"{where}.smooth: only mixture documents can be smoothed")
    if ("members" in doc) == ("random" in doc):
        raise ConfigError(f"{where}: give exactly one of 'members' or 'random'")
    if "random" in doc:
        if kind != "model-class":
            raise ConfigError(f"{where}.random: only model-class documents can be generated")
        r = doc["random"]
        _check_keys(f"{where}.random", r, RANDOM_KEYS, RANDOM_KEYS)
        try:
            members = random_class(r["kind"], _int(f"{where}.random.size", r["size"], 1),
                                   _int(f"{where}.random.seed", r["seed"], 0), A)
        except ConfigError:
            raise
        except SeqmixError as exc:
            raise ConfigError(f"{where}.random: {exc}") from exc
        return ModelDocument(kind, A, members, None, ident, smooth, prov)
    pairs = _members(f"{where}.members", doc["members"], A, need_weights=kind != "model-class")
    weights = [w for _, w in pairs] if pairs[0][1] is not None else None
    return ModelDocument(kind, A, [m for m, _ in pairs], weights, ident, smooth, prov)


def loads(text: str, where: str = "document") -> ModelDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{where}: not valid YAML: {exc}") from exc
    return parse(data, where)


def load(path: str | Path) -> ModelDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text, str(path))


# ---------------------------------------------------------------------------
# measure -> document
# ---------------------------------------------------------------------------


def _plain(x):
    """Convert numpy scalars and arrays to YAML-safe builtins."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def member_doc(m: ProcessMeasure) -> dict:
    if isinstance(m, UniformIID):
        return {"family": "uniform"}
    if isinstance(m, IIDCategorical):
        if m.A == 2 and m.theta[0] == 1.0 - m.theta[1]:
            return {"family": "bernoulli", "p": float(m.theta[1])}
        return {"family": "iid", "theta": _plain(m.theta)}
    if isinstance(m, KTEstimator):
        return {"family": "kt"}
    if isinstance(m, MarkovChain):
        return {"family": "markov", "initial": _plain(m.initial), "transition": _plain(m.transition)}
    if isinstance(m, Dirac):
        return {"family": "dirac", "prefix": list(m.prefix), "period": list(m.period)}
    if isinstance(m, SwitchingKT):
        return {"family": "switching_kt", "alpha_hat": m.alpha_hat}
    if isinstance(m, FiniteMixture):
        d = {"family": "mixture", "members": [
            {**member_doc(mu), "weight": float(w)} for w, mu in zip(m.weights, m.components)
        ]}
        if m._tag:
            d["tag"] = m._tag
        return d
    raise ConfigError(f"no document form for {type(m).__name__}")


def class_doc(members: Sequence[ProcessMeasure], kind: str = "model-class", ident: str = "",
              weights: Sequence[float] | None = None, smooth: bool = False,
              provenance: dict | None = None) -> dict:
    if kind not in KINDS:
        raise ConfigError(f"unknown document kind {kind!r}")
    items = [member_doc(m) for m in members]
    if weights is not None:
        for d, w in zip(items, weights):
            d["weight"] = float(w)
    doc = {"kind": kind, "id": ident, "alphabet": int(members[0].A), "members": items}
    if smooth:
        doc["smooth"] = True
    if provenance:
        doc["provenance"] = _plain(provenance)
    return doc


def dumps(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def dump(doc: dict, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def extracted_doc(ex, ident: str = "extracted") -> dict:
    """Document for an extracted mixture: used members, their weights, smoothing and provenance."""
    used = [j for j in range(len(ex.members)) if ex.component_weights[j] > 0]
    prov = ex.provenance()
    prov["member_index"] = used
    return class_doc([ex.members[j] for j in used], "mixture", ident,
                     [ex.component_weights[j] for j in used], smooth=True, provenance=prov)


def prior_doc(members: Sequence[ProcessMeasure], result, class_id: str) -> dict:
    """Document for a capacity-achieving prior; zero-weight members are dropped."""
    keep = [i for i, w in enumerate(result.prior) if w > 0]
    prov = {"class_id": class_id, "n": result.n, "value_bits": result.value, "gap": result.gap,
            "iterations": result.iterations, "member_index": keep}
    return class_doc([members[i] for i in keep], "prior", f"{class_id}-prior",
                     [result.prior[i] for i in keep], provenance=prov)
