"""Run specification: one JSON file configures an entire pipeline run.

A run is a reproducible artifact: the spec carries the corpus source
(synthetic parameters or an external manifest), imaging and discriminator
configuration, the analytics thresholds, and one master seed. CLI flags only
override single fields.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .discriminator import TrainConfig
from .graph import EDGE_RULES, ENUM_BUDGET, OBSERVABILITY_MODES, SAMPLE_COUNT
from .synth import DEFAULT_JITTER, MutationModel

RUNSPEC_SCHEMA_VERSION = 1

# Desk-scale defaults keep a full 5x25 matrix run in minutes; the paper-scale
# profile (500 images of 1e5 samples per measurement) is a preset.
DESK_IMAGING = {"samples_per_image": 10_000, "images_per_measurement": 100}
PAPER_IMAGING = {"samples_per_image": 100_000, "images_per_measurement": 500}


class RunSpecError(Exception):
    """The run spec failed validation."""


@dataclass(frozen=True)
class SynthSource:
    """Parameters for a simulated corpus (see synth.MutationModel)."""

    n_tx: int = 5
    n_meas: int = 25
    num_latent_states: int = 2
    stay_prob: float = 0.6
    state_separation: float = 2.0
    jitter_sigma: dict = field(default_factory=lambda: dict(DEFAULT_JITTER))
    snr_db: float = 25.0
    samples_per_meas: int | None = None  # default: exactly enough for imaging
    sample_rate_hz: float = 512_000.0
    center_freq_hz: float = 900e6

    def mutation_model(self, seed):
        return MutationModel(
            num_latent_states=self.num_latent_states,
            stay_prob=self.stay_prob,
            jitter_sigma=dict(self.jitter_sigma),
            state_separation=self.state_separation,
            snr_db=self.snr_db,
            seed=seed,
        )


@dataclass(frozen=True)
class ImagingConfig:
    samples_per_image: int = DESK_IMAGING["samples_per_image"]
    images_per_measurement: int = DESK_IMAGING["images_per_measurement"]
    extent_quantile: float = 0.999

    def __post_init__(self):
        if self.samples_per_image < 1 or self.images_per_measurement < 1:
            raise RunSpecError("imaging counts must be >= 1")
        if not 0.0 < self.extent_quantile <= 1.0:
            raise RunSpecError("extent_quantile must lie in (0, 1]")


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Either the reference hyperparameters or an external plug-in command."""

    reference: TrainConfig = TrainConfig()
    plugin_command: tuple | None = None

    @property
    def uses_plugin(self):
        return self.plugin_command is not None


@dataclass(frozen=True)
class AnalyticsConfig:
    tau_grid: tuple = tuple(round(0.05 * i, 2) for i in range(21))
    degree_taus: tuple = (0.6, 0.75, 0.9)
    subset_sizes: tuple = (2, 3, 4)
    cluster_tau: float = 0.75
    edge_rule: str = "strict"
    observability_mode: str = "component_closure"
    region_eps_hi: float = 0.0
    region_eps_lo: float = 0.0
    enum_budget: int = ENUM_BUDGET
    observability_samples: int = SAMPLE_COUNT

    def __post_init__(self):
        for tau in (*self.tau_grid, *self.degree_taus, self.cluster_tau):
            if not 0.0 <= tau <= 1.0:
                raise RunSpecError(f"tau value {tau} outside [0, 1]")
        if list(self.tau_grid) != sorted(self.tau_grid):
            raise RunSpecError("tau_grid must be sorted ascending")
        if self.edge_rule not in EDGE_RULES:
            raise RunSpecError(f"edge_rule must be one of {EDGE_RULES}")
        if self.observability_mode not in OBSERVABILITY_MODES:
            raise RunSpecError(f"observability_mode must be one of {OBSERVABILITY_MODES}")
        if any(k < 2 for k in self.subset_sizes):
            raise RunSpecError("subset sizes must be >= 2")


@dataclass(frozen=True)
class RunSpec:
    """Everything one pipeline run needs; a JSON-serializable value object."""

    out_dir: str
    seed: int = 0
    corpus_manifest: str | None = None  # external corpus; None => synthetic
    synth: SynthSource = SynthSource()
    imaging: ImagingConfig = ImagingConfig()
    discriminator: DiscriminatorConfig = DiscriminatorConfig()
    analytics: AnalyticsConfig = AnalyticsConfig()

    # --- run-directory layout -------------------------------------------
    @property
    def run_dir(self):
        return Path(self.out_dir)

    @property
    def corpus_dir(self):
        return self.run_dir / "corpus"

    @property
    def manifest_path(self):
        if self.corpus_manifest is not None:
            return Path(self.corpus_manifest)
        return self.corpus_dir / "manifest.json"

    @property
    def ground_truth_path(self):
        return self.manifest_path.parent / "ground_truth.json"

    @property
    def matrices_dir(self):
        return self.run_dir / "matrices"

    def matrix_path(self, tx_id):
        return self.matrices_dir / f"tx{tx_id:02d}.json"

    @property
    def images_dir(self):
        return self.run_dir / "images"

    @property
    def report_dir(self):
        return self.run_dir / "report"

    @property
    def logs_dir(self):
        return self.run_dir / "logs"

    def samples_per_measurement(self):
        if self.synth.samples_per_meas is not None:
            return self.synth.samples_per_meas
        return self.imaging.samples_per_image * self.imaging.images_per_measurement

    def to_json_dict(self):
        doc = {
            "schema_version": RUNSPEC_SCHEMA_VERSION,
            "seed": self.seed,
            "out_dir": str(self.out_dir),
            "imaging": asdict(self.imaging),
            "discriminator": {
                "reference": asdict(self.discriminator.reference),
                "plugin_command": (
                    list(self.discriminator.plugin_command)
                    if self.discriminator.plugin_command
                    else None
                ),
            },
            "analytics": {
                **asdict(self.analytics),
                "tau_grid": list(self.analytics.tau_grid),
                "degree_taus": list(self.analytics.degree_taus),
                "subset_sizes": list(self.analytics.subset_sizes),
            },
        }
        if self.corpus_manifest is not None:
            doc["corpus"] = {"manifest": str(self.corpus_manifest)}
        else:
            doc["corpus"] = {"synth": asdict(self.synth)}
        return doc


def _build(doc, base_dir):
    if not isinstance(doc, dict):
        raise RunSpecError("run spec must be a JSON object")
    version = doc.get("schema_version", RUNSPEC_SCHEMA_VERSION)
    if version != RUNSPEC_SCHEMA_VERSION:
        raise RunSpecError(f"unsupported run-spec schema_version {version!r}")
    known = {"schema_version", "seed", "out_dir", "profile", "corpus", "imaging",
             "discriminator", "analytics"}
    unknown = set(doc) - known
    if unknown:
        raise RunSpecError(f"unknown run-spec fields: {sorted(unknown)}")

    if "out_dir" not in doc:
        raise RunSpecError("run spec must set out_dir")
    out_dir = str(Path(base_dir, doc["out_dir"]))

    profile = doc.get("profile", "desk")
    if profile not in ("desk", "paper"):
        raise RunSpecError(f"profile must be 'desk' or 'paper', got {profile!r}")
    imaging_defaults = DESK_IMAGING if profile == "desk" else PAPER_IMAGING
    try:
        imaging = ImagingConfig(**{**imaging_defaults, **doc.get("imaging", {})})
    except TypeError as exc:
        raise RunSpecError(f"bad imaging config: {exc}") from exc

    corpus = doc.get("corpus", {"synth": {}})
    corpus_manifest = None
    synth = SynthSource()
    if "manifest" in corpus:
        corpus_manifest = str(Path(base_dir, corpus["manifest"]))
    elif "synth" in corpus:
        try:
            synth = SynthSource(**corpus["synth"])
        except TypeError as exc:
            raise RunSpecError(f"bad synth config: {exc}") from exc
    else:
        raise RunSpecError("corpus must contain either 'manifest' or 'synth'")

    disc_doc = doc.get("discriminator", {})
    try:
        reference = TrainConfig(**disc_doc.get("reference", {}))
    except TypeError as exc:
        raise RunSpecError(f"bad reference discriminator config: {exc}") from exc
    plugin_command = disc_doc.get("plugin_command")
    if plugin_command is not None:
        plugin_command = tuple(str(c) for c in plugin_command)
        if not plugin_command:
            raise RunSpecError("plugin_command must be a non-empty list")
    discriminator = DiscriminatorConfig(reference=reference, plugin_command=plugin_command)

    analytics_doc = {
        key: tuple(value) if isinstance(value, list) else value
        for key, value in doc.get("analytics", {}).items()
    }
    try:
        analytics = AnalyticsConfig(**analytics_doc)
    except TypeError as exc:
        raise RunSpecError(f"bad analytics config: {exc}") from exc

    return RunSpec(
        out_dir=out_dir,
        seed=int(doc.get("seed", 0)),
        corpus_manifest=corpus_manifest,
        synth=synth,
        imaging=imaging,
        discriminator=discriminator,
        analytics=analytics,
    )


def load_runspec(path, seed=None, out_dir=None):
    """Parse and validate a run-spec file; flags override single fields.

    Relative paths inside the spec resolve against the spec file's directory.
    An external corpus manifest must exist at validation time.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise RunSpecError(f"cannot read run spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RunSpecError(f"{path}: invalid JSON ({exc})") from exc

    spec = _build(doc, path.parent)
    if seed is not None:
        spec = replace(spec, seed=int(seed))
    if out_dir is not None:
        spec = replace(spec, out_dir=str(out_dir))
    if spec.corpus_manifest is not None and not Path(spec.corpus_manifest).is_file():
        raise RunSpecError(f"corpus manifest not found: {spec.corpus_manifest}")
    return spec
