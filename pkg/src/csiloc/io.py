"""Binary containers, config files, CSV exports, and run manifests.

Containers are a length-prefixed JSON header followed by raw little-endian
payload bytes. Datasets store fixed-stride records (x, y, then the CSI
matrix as complex f64 pairs, or the profile matrix as f64); model files
store their arrays back to back in the order listed in the header.
"""

import csv
import hashlib
import json
import struct

import numpy as np

from ._version import __version__
from .autoencoder import AutoencoderModel
from .channel import GeoTaggedSample, ScenarioConfig
from .errors import ConfigurationError, DomainError
from .gpr import GprModel, KernelSpec

_MAGIC = b"CSLC"

_SCENARIO_FIELDS = (
    "carrier_frequency", "bandwidth", "n_antennas", "n_subcarriers", "antenna_spacing",
    "bs_position", "scatterer_positions", "grid_origin", "grid_rows", "grid_cols",
    "grid_spacing", "rng_seed",
)


def _dump_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode()


def write_container(path, header: dict, payload: bytes = b""):
    blob = _dump_header(header)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)


def read_container(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ConfigurationError(f"{path}: not a csiloc container")
        (length,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(length).decode())
        payload = fh.read()
    return header, payload


# ---------------------------------------------------------------- scenarios

def scenario_to_dict(scenario: ScenarioConfig) -> dict:
    return {name: getattr(scenario, name) for name in _SCENARIO_FIELDS}


def scenario_from_dict(data: dict) -> ScenarioConfig:
    unknown = set(data) - set(_SCENARIO_FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown scenario fields: {sorted(unknown)}")
    missing = set(_SCENARIO_FIELDS) - {"antenna_spacing", "rng_seed"} - set(data)
    if missing:
        raise ConfigurationError(f"missing scenario fields: {sorted(missing)}")
    return ScenarioConfig(**data)


def load_scenario(path) -> ScenarioConfig:
    """Parse a scenario JSON file, reporting the line/column of syntax errors."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    return scenario_from_dict(data)


def save_scenario(path, scenario: ScenarioConfig):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------- datasets

def save_dataset(path, scenario: ScenarioConfig, samples):
    """Write geo-tagged CSI samples: records of (x, y, H) in row-major grid order."""
    n_t, n_c = scenario.n_antennas, scenario.n_subcarriers
    records = np.empty((len(samples), 2 + 2 * n_t * n_c), dtype="<f8")
    for i, s in enumerate(samples):
        if s.csi.shape != (n_t, n_c):
            raise DomainError(f"sample {i} CSI shape {s.csi.shape} != ({n_t}, {n_c})")
        records[i, 0:2] = s.position
        flat = np.ascontiguousarray(s.csi, dtype="<c16").view("<f8").ravel()
        records[i, 2:] = flat
    header = {
        "kind": "dataset",
        "dtype": "csi-c128",
        "sample_count": len(samples),
        "scenario": scenario_to_dict(scenario),
        "version": __version__,
    }
    write_container(path, header, records.tobytes())


def load_dataset(path):
    """Read a CSI dataset: (scenario, list of GeoTaggedSample)."""
    header, payload = read_container(path)
    if header.get("kind") != "dataset" or header.get("dtype") != "csi-c128":
        raise ConfigurationError(f"{path}: not a CSI dataset container")
    scenario = scenario_from_dict(header["scenario"])
    n = header["sample_count"]
    n_t, n_c = scenario.n_antennas, scenario.n_subcarriers
    stride = 2 + 2 * n_t * n_c
    records = np.frombuffer(payload, dtype="<f8").reshape(n, stride)
    samples = []
    for row in records:
        csi = row[2:].copy().view("<c16").reshape(n_t, n_c)
        samples.append(GeoTaggedSample(position=row[0:2].copy(), csi=csi))
    return scenario, samples


def save_adp_dataset(path, scenario: ScenarioConfig, positions, profiles):
    """Cache angle-delay profiles: records of (x, y, A) with dtype tag adp-f64."""
    positions = np.asarray(positions, dtype="<f8")
    profiles = np.asarray(profiles, dtype="<f8")
    n = positions.shape[0]
    flat = profiles.reshape(n, -1)
    records = np.hstack([positions, flat]).astype("<f8")
    header = {
        "kind": "dataset",
        "dtype": "adp-f64",
        "sample_count": n,
        "profile_shape": list(profiles.shape[1:]),
        "scenario": scenario_to_dict(scenario),
        "version": __version__,
    }
    write_container(path, header, records.tobytes())


def load_adp_dataset(path):
    header, payload = read_container(path)
    if header.get("dtype") != "adp-f64":
        raise ConfigurationError(f"{path}: not a profile dataset container")
    scenario = scenario_from_dict(header["scenario"])
    n = header["sample_count"]
    shape = tuple(header["profile_shape"])
    records = np.frombuffer(payload, dtype="<f8").reshape(n, 2 + int(np.prod(shape)))
    positions = records[:, 0:2].copy()
    profiles = records[:, 2:].copy().reshape((n,) + shape)
    return scenario, positions, profiles


# -------------------------------------------------------------- GPR models

def save_gpr_model(path, model: GprModel):
    spec = model.kernel
    arrays = [model.X, model.y_centered, model.chol, model.weights]
    header = {
        "kind": "gpr-model",
        "kernel": {
            "kind": spec.kind,
            "signal_std": spec.signal_std,
            "length_scale": spec.length_scale,
            "noise_std": spec.noise_std,
            "mixture": spec.mixture,
            "standard_form": spec.standard_form,
        },
        "n": int(model.X.shape[0]),
        "d": int(model.X.shape[1]),
        "target_mean": model.target_mean,
        "jitter": model.jitter,
        "nlml": model.nlml,
        "version": __version__,
    }
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    write_container(path, header, payload)


def load_gpr_model(path) -> GprModel:
    header, payload = read_container(path)
    if header.get("kind") != "gpr-model":
        raise ConfigurationError(f"{path}: not a GPR model container")
    n, d = header["n"], header["d"]
    buf = np.frombuffer(payload, dtype="<f8")
    sizes = [n * d, n, n * n, n]
    offsets = np.cumsum([0] + sizes)
    X = buf[offsets[0]:offsets[1]].copy().reshape(n, d)
    y_centered = buf[offsets[1]:offsets[2]].copy()
    chol = buf[offsets[2]:offsets[3]].copy().reshape(n, n)
    weights = buf[offsets[3]:offsets[4]].copy()
    return GprModel(
        kernel=KernelSpec(**header["kernel"]),
        X=X,
        y_centered=y_centered,
        target_mean=header["target_mean"],
        chol=chol,
        weights=weights,
        jitter=header["jitter"],
        nlml=header["nlml"],
    )


# ------------------------------------------------------- autoencoder models

def save_autoencoder(path, model: AutoencoderModel):
    arrays = (
        model.encoder_weights + model.encoder_biases
        + model.decoder_weights + model.decoder_biases
    )
    header = {
        "kind": "fcae-model",
        "layer_widths": list(model.layer_widths),
        "leaky_slope": model.leaky_slope,
        "rng_seed": model.rng_seed,
        "epochs_trained": model.epochs_trained,
        "provenance": list(model.provenance),
        "shapes": [list(a.shape) for a in arrays],
        "version": __version__,
    }
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    write_container(path, header, payload)


def load_autoencoder(path) -> AutoencoderModel:
    header, payload = read_container(path)
    if header.get("kind") != "fcae-model":
        raise ConfigurationError(f"{path}: not an autoencoder model container")
    buf = np.frombuffer(payload, dtype="<f8")
    arrays = []
    offset = 0
    for shape in header["shapes"]:
        size = int(np.prod(shape))
        arrays.append(buf[offset:offset + size].copy().reshape(shape))
        offset += size
    n_layers = len(header["layer_widths"])  # encoder has n_layers dense layers
    n_dec = n_layers - 1
    enc_w = arrays[:n_layers]
    enc_b = arrays[n_layers:2 * n_layers]
    dec_w = arrays[2 * n_layers:2 * n_layers + n_dec]
    dec_b = arrays[2 * n_layers + n_dec:]
    return AutoencoderModel(
        layer_widths=tuple(header["layer_widths"]),
        leaky_slope=header["leaky_slope"],
        encoder_weights=enc_w,
        encoder_biases=enc_b,
        decoder_weights=dec_w,
        decoder_biases=dec_b,
        rng_seed=header["rng_seed"],
        epochs_trained=header["epochs_trained"],
        provenance=tuple(header["provenance"]),
    )


# ------------------------------------------------------------------- CSVs

def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(history):
            writer.writerow([epoch, repr(loss)])


def write_surface_csv(path, samples):
    """Objective-surface samples: one row per evaluated hyperparameter point."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kernel", "sigma", "length_scale", "alpha", "noise", "nlml", "cv_loss", "of"])
        for s in samples:
            writer.writerow([
                s.kind,
                repr(s.spec.signal_std),
                repr(s.spec.length_scale),
                "" if s.spec.mixture is None else repr(s.spec.mixture),
                repr(s.spec.noise_std),
                repr(s.nlml),
                repr(s.cv),
                repr(s.of),
            ])


# --------------------------------------------------------------- manifests

def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(directory, command: str, input_hashes: dict, seeds: dict,
                   outputs, wall_time_s: float):
    """One manifest per artifact directory, recording provenance and timing."""
    manifest = {
        "command": command,
        "inputs": input_hashes,
        "seeds": seeds,
        "version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "wall_time_s": wall_time_s,
    }
    path = directory / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
