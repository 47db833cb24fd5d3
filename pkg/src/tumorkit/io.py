"""Volume file I/O: a single-file NIfTI-1 subset and a raw JSON+binary pair.

NIfTI support covers uncompressed (or gzip-wrapped) ``n+1`` files with
datatypes uint8, int16 and float32.  Orientation fields are ignored; data is
handled purely in voxel space.  NIfTI stores ``x`` fastest, so header
``dim[1], dim[2], dim[3]`` map to (width, height, depth).

The raw format is ``<name>.json`` (keys ``dims``, ``spacing``, ``dtype``)
next to ``<name>.bin`` holding little-endian voxels in C order.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import FormatError, IoError, UnsupportedError
from .volume import BinaryMask, LabelVolume, ProbabilityStack, Volume3

AnyVolume = Union[Volume3, LabelVolume, BinaryMask]

HEADER_SIZE = 348
DEFAULT_VOX_OFFSET = 352

NIFTI_DTYPES = {2: "u1", 4: "i2", 16: "f4"}
RAW_DTYPES = {"u8": "u1", "i16": "i2", "f32": "f4"}


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as fh:
                return fh.read()
        return path.read_bytes()
    except (OSError, EOFError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "wb") as fh:
                fh.write(payload)
        else:
            path.write_bytes(payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def infer_format(path: Union[str, Path]) -> str:
    name = str(path)
    if name.endswith((".nii", ".nii.gz")):
        return "nifti"
    if name.endswith((".json", ".bin")) or Path(name + ".json").exists():
        return "raw"
    raise UnsupportedError(f"cannot infer volume format from {path!r}")


def load_volume(path, format: str | None = None, labels: bool = False) -> AnyVolume:
    """Load a volume from ``path``.

    With ``labels=True`` the result is a :class:`LabelVolume`; integer-valued
    non-uint8 payloads are accepted as long as they fit in uint8.
    """
    path = Path(path)
    fmt = format or infer_format(path)
    if fmt == "nifti":
        arr, spacing = _load_nifti(path)
    elif fmt == "raw":
        arr, spacing = _load_raw(path)
    else:
        raise UnsupportedError(f"unknown format {fmt!r}")
    return _wrap(arr, spacing, labels, path)


def _wrap(arr: np.ndarray, spacing, labels: bool, path: Path) -> AnyVolume:
    if not labels:
        if arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{path}: payload contains NaN or Inf")
        return Volume3(arr, spacing)
    if arr.dtype != np.uint8:
        if arr.size and not (
            np.all(np.isfinite(arr))
            and np.all(arr == np.round(arr))
            and arr.min() >= 0
            and arr.max() <= 255
        ):
            raise FormatError(f"{path}: payload is not a uint8-compatible label map")
        arr = arr.astype(np.uint8)
    return LabelVolume(arr, spacing)


def _load_nifti(path: Path) -> tuple[np.ndarray, tuple]:
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"{path}: file shorter than a NIfTI-1 header")

    endian = None
    for e in ("<", ">"):
        size = struct.unpack_from(e + "i", raw, 0)[0]
        if size == HEADER_SIZE:
            endian = e
            break
        if size == 540:
            raise UnsupportedError(f"{path}: NIfTI-2 is not supported")
    if endian is None:
        raise FormatError(f"{path}: sizeof_hdr is not 348")

    magic = raw[344:348]
    if magic == b"ni1\x00":
        raise UnsupportedError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")
    if magic != b"n+1\x00":
        raise FormatError(f"{path}: bad magic {magic!r}")

    dim = struct.unpack_from(endian + "8h", raw, 40)
    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise FormatError(f"{path}: dim[0]={ndim} out of range")
    extents = [dim[i] if i <= ndim else 1 for i in range(1, 8)]
    if any(n < 1 for n in extents):
        raise FormatError(f"{path}: non-positive extent in dim {dim}")
    if any(n != 1 for n in extents[3:]):
        raise UnsupportedError(f"{path}: only 3-D volumes are supported, dim={dim}")
    nx, ny, nz = extents[:3]

    datatype, bitpix = struct.unpack_from(endian + "2h", raw, 70)
    if datatype not in NIFTI_DTYPES:
        raise UnsupportedError(f"{path}: datatype {datatype} is not supported")
    dtype = np.dtype(endian + NIFTI_DTYPES[datatype])
    if bitpix != dtype.itemsize * 8:
        raise FormatError(f"{path}: bitpix {bitpix} does not match datatype {datatype}")

    pixdim = struct.unpack_from(endian + "8f", raw, 76)
    spacing = (float(pixdim[3]), float(pixdim[2]), float(pixdim[1]))
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise FormatError(f"{path}: non-positive voxel spacing {spacing}")

    vox_offset, slope, inter = struct.unpack_from(endian + "3f", raw, 108)
    offset = int(vox_offset)
    if offset < DEFAULT_VOX_OFFSET or offset != vox_offset:
        raise FormatError(f"{path}: invalid vox_offset {vox_offset}")

    expected = nx * ny * nz * dtype.itemsize
    if len(raw) - offset != expected:
        raise FormatError(
            f"{path}: payload has {len(raw) - offset} bytes, header implies {expected}"
        )
    arr = np.frombuffer(raw, dtype=dtype, count=nx * ny * nz, offset=offset)
    arr = arr.reshape(nz, ny, nx).astype(dtype.newbyteorder("="))

    if dtype.kind in "iu" and slope != 0 and np.isfinite(slope) and (slope, inter) != (1.0, 0.0):
        arr = (arr.astype(np.float64) * slope + inter).astype(np.float32)
    return arr, spacing


def _nifti_header(dims, spacing, datatype: int, bitpix: int) -> bytes:
    d, h, w = dims
    hdr = bytearray(DEFAULT_VOX_OFFSET)  # header + 4-byte empty extension flag
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, w, h, d, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, datatype, bitpix)
    struct.pack_into("<8f", hdr, 76, 1.0, spacing[2], spacing[1], spacing[0], 0, 0, 0, 0)
    struct.pack_into("<3f", hdr, 108, float(DEFAULT_VOX_OFFSET), 0.0, 0.0)
    hdr[123] = 2  # xyzt_units: mm
    hdr[148:156] = b"tumorkit"
    hdr[344:348] = b"n+1\x00"
    return bytes(hdr)


def _payload(v: AnyVolume) -> tuple[np.ndarray, str]:
    if isinstance(v, (LabelVolume, BinaryMask)):
        return v.data.astype("<u1"), "u8"
    if isinstance(v, Volume3):
        return v.data.astype("<f4"), "f32"
    raise TypeError(f"cannot save {type(v).__name__}")


def save_volume(v: AnyVolume, path, format: str | None = None) -> None:
    """Write ``v`` to ``path``; output is always little-endian."""
    path = Path(path)
    fmt = format or infer_format(path)
    arr, code = _payload(v)
    if fmt == "nifti":
        datatype = 2 if code == "u8" else 16
        header = _nifti_header(v.dims, v.spacing, datatype, arr.dtype.itemsize * 8)
        _write_bytes(path, header + arr.tobytes(order="C"))
    elif fmt == "raw":
        meta_path, bin_path = raw_paths(path)
        meta = {"dims": list(v.dims), "spacing": list(v.spacing), "dtype": code}
        try:
            meta_path.write_text(json.dumps(meta))
        except OSError as exc:
            raise IoError(f"cannot write {meta_path}: {exc}") from exc
        _write_bytes(bin_path, arr.tobytes(order="C"))
    else:
        raise UnsupportedError(f"unknown format {fmt!r}")


def raw_paths(path: Path) -> tuple[Path, Path]:
    base = str(path)
    for suffix in (".json", ".bin"):
        if base.endswith(suffix):
            base = base[: -len(suffix)]
    return Path(base + ".json"), Path(base + ".bin")


def _load_raw(path: Path) -> tuple[np.ndarray, tuple]:
    meta_path, bin_path = raw_paths(path)
    try:
        meta = json.loads(meta_path.read_text())
    except OSError as exc:
        raise IoError(f"cannot read {meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{meta_path}: invalid JSON: {exc}") from exc

    try:
        dims = [int(n) for n in meta["dims"]]
        spacing = tuple(float(s) for s in meta["spacing"])
        code = meta["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{meta_path}: malformed sidecar: {exc}") from exc
    if len(dims) != 3 or any(n < 1 for n in dims):
        raise FormatError(f"{meta_path}: dims must be 3 positive ints, got {dims}")
    if len(spacing) != 3 or not all(s > 0 for s in spacing):
        raise FormatError(f"{meta_path}: spacing must be 3 positive floats")
    if code not in RAW_DTYPES:
        raise UnsupportedError(f"{meta_path}: dtype {code!r} not in {sorted(RAW_DTYPES)}")

    dtype = np.dtype("<" + RAW_DTYPES[code])
    raw = _read_bytes(bin_path)
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(f"{bin_path}: {len(raw)} bytes, sidecar implies {expected}")
    arr = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
    return arr, spacing


def load_stack(paths, format: str | None = None) -> ProbabilityStack:
    """Load a probability stack from three files ordered WT, TC, ET."""
    if len(paths) != 3:
        raise FormatError(f"a probability stack needs 3 files (WT, TC, ET), got {len(paths)}")
    vols = [load_volume(p, format) for p in paths]
    for v in vols[1:]:
        vols[0].require_same_grid(v)
    return ProbabilityStack(vols[0].data, vols[1].data, vols[2].data, vols[0].spacing)


def save_stack(stack: ProbabilityStack, paths, format: str | None = None) -> None:
    for p, (_, arr) in zip(paths, stack.channels()):
        save_volume(Volume3(arr, stack.spacing), p, format)
