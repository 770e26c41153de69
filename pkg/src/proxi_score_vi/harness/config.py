"""Experiment configuration: a sectioned TOML file validated against a fixed schema.

Every problem found is reported at once through ValidationError, keyed by
"section.key". Syntax errors surface as ParseError with the line number.
"""
import difflib
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field

from ..errors import ParseError, ValidationError
from ..families import FAMILY_NAMES
from ..metrics import METRIC_NAMES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TARGET_KINDS = ("gaussian", "gaussian_mixture", "bayes_logistic", "bayes_mlp")
ALGO_NAMES = ("proximal_sm", "advi", "perfect_min")
SCHEDULE_NAMES = ("linear", "constant", "zero")
OPTIMIZER_NAMES = ("adam", "sgd")
INIT_NAMES = ("random", "small_eig")

_REQUIRED = object()


@dataclass(frozen=True)
class RunBlock:
    name: str
    seeds: tuple = (0, 1, 2, 3, 4)
    output_dir: str = "runs"
    description: str = ""


@dataclass(frozen=True)
class TargetBlock:
    kind: str
    dim: int = None
    order: int = 2
    n: int = 200
    n_test: int = None
    features: int = 2
    hidden_dim: int = 8
    classes: int = 2
    prior_variance: float = 1.0
    tau: float = 1.0
    data_seed: int = None
    batch_size: int = None

    @property
    def theta_dim(self):
        if self.kind == "bayes_logistic":
            return self.features
        if self.kind == "bayes_mlp":
            p, h, k = self.features, self.hidden_dim, self.classes
            return p * h + h + h * k + k
        return self.dim


@dataclass(frozen=True)
class NoiseBlock:
    beta: tuple = (0.0,)


@dataclass(frozen=True)
class FamilyBlock:
    family: str
    dim: int = None
    K: int = 2
    gumbel_temperature: float = 0.05
    init: str = "random"
    small_eig_value: float = 1e-4


@dataclass(frozen=True)
class AlgoBlock:
    algo: tuple = ("proximal_sm",)
    T: int = 500
    N: int = 20
    S: tuple = (1,)
    learning_rate: float = 1e-2
    advi_learning_rate: float = None
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.0
    schedule: tuple = ("linear",)
    schedule_constant: float = 0.5
    reset_inner_optimizer: bool = False


@dataclass(frozen=True)
class MetricsBlock:
    which: tuple = ("fkl",)
    every_k_outer: int = 1
    fkl_samples: int = 500
    nelbo_samples: int = 1000
    ece_bins: int = 10
    posterior_predictive_samples: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    run: RunBlock
    target: TargetBlock
    family: FamilyBlock
    algo: AlgoBlock = field(default_factory=AlgoBlock)
    noise: NoiseBlock = field(default_factory=NoiseBlock)
    metrics: MetricsBlock = field(default_factory=MetricsBlock)

    @property
    def dim(self):
        return self.target.theta_dim

    def to_dict(self):
        d = asdict(self)
        return json.loads(json.dumps(d))

    def canonical(self):
        """Stable text form that identifies the experiment (seeds and paths excluded)."""
        d = self.to_dict()
        for k in ("seeds", "output_dir", "description"):
            d["run"].pop(k)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def with_seeds(self, seeds):
        return ExperimentConfig(
            RunBlock(self.run.name, tuple(int(s) for s in seeds), self.run.output_dir,
                     self.run.description),
            self.target, self.family, self.algo, self.noise, self.metrics)

    def with_output_dir(self, path):
        r = self.run
        return ExperimentConfig(RunBlock(r.name, r.seeds, str(path), r.description),
                                self.target, self.family, self.algo, self.noise, self.metrics)


# key -> (kind, default). kinds: int, float, bool, str, and "list:<kind>" which
# also accepts a bare scalar.
_SCHEMA = {
    "run": (RunBlock, {
        "name": ("str", _REQUIRED), "seeds": ("list:int", None), "output_dir": ("str", None),
        "description": ("str", None)}),
    "target": (TargetBlock, {
        "kind": ("str", _REQUIRED), "dim": ("int", None), "order": ("int", None),
        "n": ("int", None), "n_test": ("int", None), "features": ("int", None),
        "hidden_dim": ("int", None), "classes": ("int", None),
        "prior_variance": ("float", None), "tau": ("float", None),
        "data_seed": ("int", None), "batch_size": ("int", None)}),
    "noise": (NoiseBlock, {"beta": ("list:float", None)}),
    "family": (FamilyBlock, {
        "family": ("str", _REQUIRED), "dim": ("int", None), "K": ("int", None),
        "gumbel_temperature": ("float", None), "init": ("str", None),
        "small_eig_value": ("float", None)}),
    "algo": (AlgoBlock, {
        "algo": ("list:str", None), "T": ("int", None), "N": ("int", None),
        "S": ("list:int", None), "learning_rate": ("float", None),
        "advi_learning_rate": ("float", None), "optimizer": ("str", None),
        "beta1": ("float", None), "beta2": ("float", None), "eps": ("float", None),
        "momentum": ("float", None), "schedule": ("list:str", None),
        "schedule_constant": ("float", None), "reset_inner_optimizer": ("bool", None)}),
    "metrics": (MetricsBlock, {
        "which": ("list:str", None), "every_k_outer": ("int", None),
        "fkl_samples": ("int", None), "nelbo_samples": ("int", None),
        "ece_bins": ("int", None), "posterior_predictive_samples": ("int", None)}),
}
_REQUIRED_SECTIONS = ("run", "target", "family")


def _suggest(word, options):
    close = difflib.get_close_matches(word, list(options), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def _check_scalar(kind, value):
    if kind == "bool":
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if kind == "int":
        return isinstance(value, int)
    if kind == "float":
        return isinstance(value, (int, float))
    return isinstance(value, str)


def _coerce(kind, value):
    """Return (value, error message or None)."""
    if kind.startswith("list:"):
        inner = kind[5:]
        items = value if isinstance(value, list) else [value]
        if not items:
            return None, "must not be empty"
        if not all(_check_scalar(inner, v) for v in items):
            return None, f"expected {inner} or a list of {inner}"
        if inner == "float":
            items = [float(v) for v in items]
        return tuple(items), None
    if not _check_scalar(kind, value):
        return None, f"expected {kind}, got {type(value).__name__}"
    return (float(value) if kind == "float" else value), None


def _build_blocks(doc, errors):
    blocks = {}
    for section in doc:
        if section not in _SCHEMA:
            errors.append((section, "unknown section" + _suggest(section, _SCHEMA)))
        elif not isinstance(doc[section], dict):
            errors.append((section, "expected a [section] table"))
    for section, (cls, keys) in _SCHEMA.items():
        table = doc.get(section)
        if not isinstance(table, dict):
            if section in _REQUIRED_SECTIONS:
                errors.append((section, "missing section"))
            blocks[section] = None if section in _REQUIRED_SECTIONS else cls()
            continue
        kwargs, ok = {}, True
        for key, value in table.items():
            name = f"{section}.{key}"
            if key not in keys:
                errors.append((name, "unknown key" + _suggest(key, keys)))
                continue
            v, msg = _coerce(keys[key][0], value)
            if msg:
                errors.append((name, msg))
                ok = False
            else:
                kwargs[key] = v
        for key, (_, default) in keys.items():
            if default is _REQUIRED and key not in table:
                errors.append((f"{section}.{key}", "required key missing"))
                ok = False
        blocks[section] = cls(**kwargs) if ok else None
    return blocks


def _positive(errors, name, value, strict=True):
    bad = value <= 0 if strict else value < 0
    if bad:
        errors.append((name, "must be > 0" if strict else "must be >= 0"))


def _validate(cfg_blocks, errors):
    t, f, a = cfg_blocks["target"], cfg_blocks["family"], cfg_blocks["algo"]
    m, nz, r = cfg_blocks["metrics"], cfg_blocks["noise"], cfg_blocks["run"]
    if r is not None and not r.seeds:
        errors.append(("run.seeds", "need at least one seed"))
    if t is not None:
        if t.kind not in TARGET_KINDS:
            errors.append(("target.kind", f"expected one of {TARGET_KINDS}" + _suggest(t.kind, TARGET_KINDS)))
        elif t.kind in ("gaussian", "gaussian_mixture"):
            if t.dim is None:
                errors.append(("target.dim", f"required for {t.kind} targets"))
            else:
                _positive(errors, "target.dim", t.dim)
            if t.kind == "gaussian_mixture":
                _positive(errors, "target.order", t.order)
            if t.batch_size is not None:
                errors.append(("target.batch_size", "mini-batches need a Bayesian target"))
        else:
            for k in ("n", "features", "hidden_dim", "classes"):
                _positive(errors, f"target.{k}", getattr(t, k))
            if t.n_test is not None:
                _positive(errors, "target.n_test", t.n_test)
            if t.kind == "bayes_mlp" and t.classes < 2:
                errors.append(("target.classes", "need at least 2 classes"))
            if t.batch_size is not None and not 1 <= t.batch_size <= t.n:
                errors.append(("target.batch_size", f"must lie in [1, target.n={t.n}]"))
        _positive(errors, "target.prior_variance", t.prior_variance)
        _positive(errors, "target.tau", t.tau)
    if f is not None:
        if f.family not in FAMILY_NAMES:
            errors.append(("family.family", f"expected one of {FAMILY_NAMES}" + _suggest(f.family, FAMILY_NAMES)))
        if f.init not in INIT_NAMES:
            errors.append(("family.init", f"expected one of {INIT_NAMES}"))
        _positive(errors, "family.K", f.K)
        _positive(errors, "family.gumbel_temperature", f.gumbel_temperature)
        _positive(errors, "family.small_eig_value", f.small_eig_value)
        if t is not None and f.dim is not None and t.kind in TARGET_KINDS and t.theta_dim is not None \
                and f.dim != t.theta_dim:
            errors.append(("family.dim", f"family dim {f.dim} does not match target dim {t.theta_dim}"))
    if a is not None:
        for name in a.algo:
            if name not in ALGO_NAMES:
                errors.append(("algo.algo", f"unknown algorithm {name!r}" + _suggest(name, ALGO_NAMES)))
        for name in a.schedule:
            if name not in SCHEDULE_NAMES:
                errors.append(("algo.schedule", f"unknown schedule {name!r}" + _suggest(name, SCHEDULE_NAMES)))
        if a.optimizer not in OPTIMIZER_NAMES:
            errors.append(("algo.optimizer", f"expected one of {OPTIMIZER_NAMES}"))
        _positive(errors, "algo.T", a.T)
        _positive(errors, "algo.N", a.N, strict=False)
        if any(s < 1 for s in a.S):
            errors.append(("algo.S", "every S must be >= 1"))
        _positive(errors, "algo.learning_rate", a.learning_rate)
        if a.advi_learning_rate is not None:
            _positive(errors, "algo.advi_learning_rate", a.advi_learning_rate)
        _positive(errors, "algo.schedule_constant", a.schedule_constant, strict=False)
        if "perfect_min" in a.algo and (
                (t is not None and t.kind != "gaussian") or
                (f is not None and f.family not in ("gauss_full", "gauss_diag"))):
            errors.append(("algo.algo", "perfect_min needs a gaussian target and a Gaussian family"))
    if nz is not None and any(b < 0 for b in nz.beta):
        errors.append(("noise.beta", "noise levels must be >= 0"))
    if m is not None:
        for name in m.which:
            if name not in METRIC_NAMES:
                errors.append(("metrics.which", f"unknown metric {name!r}" + _suggest(name, METRIC_NAMES)))
        for k in ("every_k_outer", "fkl_samples", "nelbo_samples", "ece_bins",
                  "posterior_predictive_samples"):
            _positive(errors, f"metrics.{k}", getattr(m, k))
        if t is not None and t.kind in TARGET_KINDS:
            bayes = t.kind.startswith("bayes")
            if bayes and "fkl" in m.which:
                errors.append(("metrics.which", "fkl needs a samplable target (gaussian kinds)"))
            if bayes and "param_err" in m.which:
                errors.append(("metrics.which", "param_err needs a gaussian target"))
            if not bayes and ({"ece", "nll"} & set(m.which)):
                errors.append(("metrics.which", "ece and nll need a Bayesian classification target"))
            if "param_err" in m.which and (t.kind != "gaussian" or (
                    f is not None and f.family not in ("gauss_full", "gauss_diag"))):
                if not bayes:
                    errors.append(("metrics.which", "param_err needs a gaussian target and Gaussian family"))


def parse_config(text):
    """Parse and validate config text; raises ParseError or ValidationError."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        msg = getattr(exc, "msg", str(exc))
        raise ParseError(msg, line) from None
    errors = []
    blocks = _build_blocks(doc, errors)
    _validate(blocks, errors)
    if errors:
        raise ValidationError(errors)
    return ExperimentConfig(**blocks)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, str):
        return json.dumps(v)
    return repr(v)


def dump_config(cfg):
    """Config back to TOML text; parse_config(dump_config(c)) == c."""
    lines = []
    for section, block in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for k, v in block.items():
            if v is not None:
                lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
    return "\n".join(lines)
