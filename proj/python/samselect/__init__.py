"""Search band composites and spectral indices of a multiband raster for the
rendering a promptable segmenter outlines best."""

import json
from pathlib import Path

from ._core import (
    Backend,
    BackendError,
    ConfigError,
    DataError,
    SamselectError,
    canonical,
    enumerate_space,
    interpolation_factor,
    iou,
    mock_backend,
    onnx_runtime_available,
    pca_scores,
    render,
    sam_backend,
    search,
    synth_scene,
)

CONFIG_DIR = Path(__file__).parent / "config"


def load_wavelengths(name_or_path="sentinel2a_l2a"):
    """Band id -> nm. Accepts a bundled table name or a JSON file path."""
    path = Path(name_or_path)
    if not path.suffix:
        path = CONFIG_DIR / f"{name_or_path}.json"
    with open(path) as f:
        return {k.upper(): float(v) for k, v in json.load(f).items()}


def onnx_backend(encoder, decoder, metadata=None, variant="vit-b"):
    """SAM backend running exported ONNX graphs through onnxruntime.

    `metadata` defaults to metadata.json next to the encoder.
    """
    import onnxruntime as ort

    encoder, decoder = Path(encoder), Path(decoder)
    metadata = Path(metadata) if metadata else encoder.parent / "metadata.json"
    text = metadata.read_text()
    declared = json.loads(text).get("variant")
    if declared and declared != variant:
        raise BackendError(f"encoder variant mismatch: requested {variant}, metadata says {declared}")

    opts = ort.SessionOptions()
    opts.intra_op_num_threads = 1
    providers = ["CPUExecutionProvider"]
    enc = ort.InferenceSession(str(encoder), opts, providers=providers)
    dec = ort.InferenceSession(str(decoder), opts, providers=providers)
    return sam_backend(enc, dec, text, f"sam-{variant}:{encoder.resolve()}")


__all__ = [
    "Backend",
    "BackendError",
    "CONFIG_DIR",
    "ConfigError",
    "DataError",
    "SamselectError",
    "canonical",
    "enumerate_space",
    "interpolation_factor",
    "iou",
    "load_wavelengths",
    "mock_backend",
    "onnx_backend",
    "onnx_runtime_available",
    "pca_scores",
    "render",
    "sam_backend",
    "search",
    "synth_scene",
]
