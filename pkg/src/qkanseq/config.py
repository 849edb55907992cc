"""Experiment configuration: YAML documents and the shipped presets."""
from __future__ import annotations

import copy
import glob
import os
from dataclasses import asdict, dataclass, field
from importlib import resources

import yaml

from . import data
from .cells import KINDS, init_cell
from .errors import ConfigError
from .train import TrainConfig

DATASET_KINDS = ("shm", "bessel", "telecom", "telecom-surrogate", "csv")
TELECOM_SEQ_LENS = (4, 8, 12, 16, 32, 64)
SUITES = ("shm", "bessel", "telecom")
DATA_DIR_ENV = "QKANSEQ_DATA_DIR"

_MODEL_KEYS = {"kind", "hidden", "L", "latent_dim", "latent_out", "hqkan_shared", "use_offsets",
               "n_qubits", "depth", "n_vqcs"}
_TRAIN_KEYS = {"learning_rate", "epochs", "optimizer", "batch_size", "seed"}


@dataclass
class DatasetSpec:
    kind: str
    seq_len: int
    params: dict = field(default_factory=dict)
    ratios: tuple = (0.7, 0.15, 0.15)
    preset_family: str = ""


@dataclass
class ModelSpec:
    kind: str
    hidden: int
    L: int = 1
    latent_dim: int = 2
    latent_out: int = 1
    hqkan_shared: bool = True
    use_offsets: bool = False
    n_qubits: int = 0
    depth: int = 1
    n_vqcs: int = 4

    def build(self, seed, n=1):
        return init_cell(self.kind, n=n, m=self.hidden, seed=seed, L=self.L, latent_dim=self.latent_dim,
                         latent_out=self.latent_out, hqkan_shared=self.hqkan_shared,
                         use_offsets=self.use_offsets, n_qubits=self.n_qubits or None, depth=self.depth,
                         n_vqcs=self.n_vqcs)


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    model: ModelSpec
    train: TrainConfig
    out: str = "runs"
    name: str = ""

    def to_dict(self):
        d = {
            "name": self.name,
            "dataset": asdict(self.dataset),
            "model": asdict(self.model),
            "train": asdict(self.train),
            "out": self.out,
        }
        d["dataset"]["ratios"] = list(self.dataset.ratios)
        return d

    def dump(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def _require_keys(section, allowed, where, errors):
    for k in section:
        if k not in allowed:
            errors.append(f"{where}.{k}")


def from_dict(doc, name="") -> ExperimentConfig:
    """Validate a config mapping; every offending field is reported at once."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping", ["<root>"])
    errors = []
    ds = dict(doc.get("dataset") or {})
    md = dict(doc.get("model") or {})
    tr = dict(doc.get("train") or {})
    for section, key in ((ds, "dataset"), (md, "model")):
        if not section:
            errors.append(key)

    kind = ds.pop("kind", None)
    if kind not in DATASET_KINDS:
        errors.append("dataset.kind")
    seq_len = ds.pop("seq_len", None)
    if not isinstance(seq_len, int) or seq_len < 1:
        errors.append("dataset.seq_len")
    ratios = tuple(ds.pop("ratios", (0.7, 0.15, 0.15)))
    family = ds.pop("preset_family", "")
    params = dict(ds.pop("params", {}) or {})
    params.update(ds)
    if kind in ("telecom", "telecom-surrogate") and isinstance(seq_len, int) and seq_len not in TELECOM_SEQ_LENS:
        errors.append("dataset.seq_len")
    if kind == "csv":
        path = params.get("path")
        if not path or not os.path.exists(path):
            errors.append("dataset.params.path")

    _require_keys(md, _MODEL_KEYS, "model", errors)
    if md.get("kind") not in KINDS:
        errors.append("model.kind")
    if not isinstance(md.get("hidden"), int) or md.get("hidden", 0) < 1:
        errors.append("model.hidden")
    _require_keys(tr, _TRAIN_KEYS, "train", errors)
    train_cfg = None
    try:
        train_cfg = TrainConfig(**{k: v for k, v in tr.items() if k in _TRAIN_KEYS})
    except ConfigError as exc:
        errors.extend(f"train.{f}" for f in exc.fields)
    except (TypeError, ValueError):
        errors.append("train")
    if errors:
        raise ConfigError("invalid config fields: " + ", ".join(sorted(set(errors))), sorted(set(errors)))
    model = ModelSpec(**md)
    try:
        model.build(seed=0)
    except ConfigError as exc:
        raise ConfigError(f"invalid model: {exc}", [f"model.{f}" for f in exc.fields]) from exc
    return ExperimentConfig(
        dataset=DatasetSpec(kind=kind, seq_len=seq_len, params=params, ratios=ratios, preset_family=family),
        model=model,
        train=train_cfg,
        out=str(doc.get("out", "runs")),
        name=str(doc.get("name", name)),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return from_dict(doc, name=os.path.splitext(os.path.basename(path))[0])


# ---------------------------------------------------------------------------
# presets: one YAML per suite, holding the dataset and per-model settings


def _suite_doc(suite):
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}", ["suite"])
    text = resources.files("qkanseq.presets").joinpath(f"{suite}.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def preset_names():
    return [f"{s}-{k}" for s in SUITES for k in KINDS]


def preset_dict(name, surrogate=False):
    try:
        suite, kind = name.rsplit("-", 1)
    except ValueError:
        raise ConfigError(f"unknown preset {name!r}", ["preset"]) from None
    doc = _suite_doc(suite)
    if kind not in doc["models"]:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(preset_names())}", ["preset"])
    entry = copy.deepcopy(doc["models"][kind])
    train = dict(doc.get("train", {}))
    train.update(entry.pop("train", {}))
    dataset = copy.deepcopy(doc["dataset"])
    dataset["preset_family"] = suite
    if suite == "telecom" and surrogate:
        dataset.update(doc["surrogate"])
        dataset["kind"] = "telecom-surrogate"
    return {"name": name, "dataset": dataset, "model": dict(kind=kind, **entry), "train": train,
            "out": os.path.join("runs", name)}


def load_preset(name, surrogate=False) -> ExperimentConfig:
    return from_dict(preset_dict(name, surrogate), name=name)


def suite_kinds(suite):
    return list(_suite_doc(suite)["models"])


# ---------------------------------------------------------------------------
# materialising datasets


def telecom_files(root=None):
    root = root or os.environ.get(DATA_DIR_ENV)
    if not root:
        return []
    files = sorted(glob.glob(os.path.join(root, "*.txt")) + glob.glob(os.path.join(root, "*.tsv")))
    return files


def load_series(spec: DatasetSpec) -> data.RawSeries:
    p = dict(spec.params)
    if spec.kind == "shm":
        return data.gen_damped_shm(p.get("zeta", 0.01), p.get("omega0", 6.283185307179586),
                                   p.get("t_max", 10.0), p.get("n_points", 500))
    if spec.kind == "bessel":
        return data.gen_bessel_series(p.get("order", 2), p.get("x_max", 20.0), p.get("n_points", 500))
    if spec.kind == "telecom-surrogate":
        return data.gen_telecom_surrogate(p.get("n_points", 8784), p.get("surrogate_seed", 7))
    if spec.kind == "csv":
        return data.read_series_csv(p["path"])
    files = telecom_files(p.get("data_dir"))
    if not files:
        raise ConfigError(
            f"telecom data not found: set {DATA_DIR_ENV} to the Milan dataset directory or pass --surrogate",
            ["dataset"],
        )
    cells = data.ingest_telecom(files, p.get("cell_ids"), "sms_in", p.get("min_coverage", 0.95))
    # the busiest qualifying cell
    best = max(cells, key=lambda c: (cells[c].y.sum(), -c))
    return cells[best]


def load_dataset(spec: DatasetSpec) -> data.TimeSeriesDataset:
    return data.window_split(load_series(spec), spec.seq_len, spec.ratios, normalize=True)
