"""File readers and writers: MetaImage (.mha/.mhd), .npy v1.0, file hashing.

MetaImage stores dimensions x-fastest; on read the axis order is reversed so
that tensors are C-order with axis 0 = z (for 3-D). Spacing, origin and
direction are reordered the same way. All values round-trip bit-exact.
"""

from __future__ import annotations

import ast
import hashlib
import os
import struct
import zlib

import numpy as np

from .core import ImageGeometry, check_tensor
from .errors import CorruptFileError, FormatError

_MET_TO_DTYPE = {
    "MET_UCHAR": ("uint8", 1),
    "MET_CHAR": ("int32", 1),  # widened: the container dtype set has no int8/int16
    "MET_SHORT": ("int32", 2),
    "MET_USHORT": ("int32", 2),
    "MET_INT": ("int32", 4),
    "MET_FLOAT": ("float32", 4),
    "MET_DOUBLE": ("float64", 8),
}

_DTYPE_TO_MET = {
    "uint8": "MET_UCHAR",
    "int32": "MET_INT",
    "float32": "MET_FLOAT",
    "float64": "MET_DOUBLE",
}

_RAW_DTYPE = {  # on-disk element type before widening
    "MET_UCHAR": np.dtype(np.uint8),
    "MET_CHAR": np.dtype(np.int8),
    "MET_SHORT": np.dtype(np.int16),
    "MET_USHORT": np.dtype(np.uint16),
    "MET_INT": np.dtype(np.int32),
    "MET_FLOAT": np.dtype(np.float32),
    "MET_DOUBLE": np.dtype(np.float64),
}


def _parse_metaimage_header(fh) -> dict:
    """Read 'Key = Value' lines until ElementDataFile; leaves fh at the payload."""
    header = {}
    while True:
        line = fh.readline()
        if not line:
            raise CorruptFileError("MetaImage header ended before ElementDataFile")
        try:
            text = line.decode("ascii").strip()
        except UnicodeDecodeError as exc:
            raise FormatError("MetaImage header is not ASCII") from exc
        if not text:
            continue
        if "=" not in text:
            raise FormatError(f"malformed MetaImage header line: {text!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        header[key] = value
        if key == "ElementDataFile":
            return header


def _geometry_from_header(header: dict, ndims: int) -> ImageGeometry:
    spacing = header.get("ElementSpacing") or header.get("ElementSize")
    spacing_xyz = [float(v) for v in spacing.split()] if spacing else [1.0] * ndims
    origin = header.get("Offset") or header.get("Origin") or header.get("Position")
    origin_xyz = [float(v) for v in origin.split()] if origin else [0.0] * ndims
    direction = header.get("TransformMatrix") or header.get("Orientation") or header.get("Rotation")
    if direction:
        mat_xyz = np.asarray([float(v) for v in direction.split()], dtype=np.float64)
        if mat_xyz.size != ndims * ndims:
            raise FormatError("TransformMatrix size does not match NDims")
        mat_xyz = mat_xyz.reshape(ndims, ndims)
    else:
        mat_xyz = np.eye(ndims)
    # reverse x..z ordering to the tensor's z..x ordering
    mat = mat_xyz[::-1, ::-1].copy()
    return ImageGeometry(
        spacing=tuple(spacing_xyz[::-1]),
        origin=tuple(origin_xyz[::-1]),
        direction=tuple(mat.ravel()),
    )


def _header_info(header: dict, path: str):
    if "NDims" not in header or "DimSize" not in header or "ElementType" not in header:
        raise FormatError(f"{path}: MetaImage header misses NDims/DimSize/ElementType")
    ndims = int(header["NDims"])
    dims_xyz = [int(v) for v in header["DimSize"].split()]
    if len(dims_xyz) != ndims:
        raise CorruptFileError(f"{path}: DimSize does not match NDims")
    met_type = header["ElementType"]
    if met_type not in _MET_TO_DTYPE:
        raise FormatError(f"{path}: unsupported ElementType {met_type!r}")
    channels = int(header.get("ElementNumberOfChannels", "1"))
    if channels != 1:
        raise FormatError(f"{path}: multi-channel MetaImage files are not supported")
    shape = tuple(dims_xyz[::-1])
    geometry = _geometry_from_header(header, ndims)
    return shape, met_type, geometry


def read_metaimage_header(path: str) -> tuple[tuple[int, ...], str, ImageGeometry]:
    """Shape (z..x order), dtype name and geometry without reading the payload."""
    with open(path, "rb") as fh:
        header = _parse_metaimage_header(fh)
    shape, met_type, geometry = _header_info(header, path)
    return shape, _MET_TO_DTYPE[met_type][0], geometry


def read_metaimage(path: str) -> tuple[np.ndarray, ImageGeometry]:
    with open(path, "rb") as fh:
        header = _parse_metaimage_header(fh)
        shape, met_type, geometry = _header_info(header, path)
        data_file = header["ElementDataFile"]
        if data_file in ("LIST", "LIST 2D"):
            raise FormatError(f"{path}: ElementDataFile lists are not supported")
        if data_file == "LOCAL":
            payload = fh.read()
        else:
            raw_path = os.path.join(os.path.dirname(os.path.abspath(path)), data_file)
            with open(raw_path, "rb") as raw:
                payload = raw.read()

    raw_dtype = _RAW_DTYPE[met_type]
    expected = int(np.prod(shape)) * raw_dtype.itemsize
    if header.get("CompressedData", "False").lower() == "true":
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise CorruptFileError(f"{path}: compressed payload is corrupt") from exc
    if len(payload) < expected:
        raise CorruptFileError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    arr = np.frombuffer(payload[:expected], dtype=raw_dtype).reshape(shape)
    msb = (header.get("ElementByteOrderMSB") or header.get("BinaryDataByteOrderMSB") or "False")
    if msb.lower() == "true":
        arr = arr.byteswap()
    else:
        arr = arr.copy()  # frombuffer views are read-only
    target = _MET_TO_DTYPE[met_type][0]
    if arr.dtype.name != target:
        arr = arr.astype(target)
    return arr, geometry


def _format_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def write_metaimage(
    tensor: np.ndarray,
    geometry: ImageGeometry,
    path: str,
    compressed: bool = False,
) -> None:
    """Write a 2-D or 3-D tensor as .mha (single file) or .mhd (+ sidecar raw)."""
    check_tensor(tensor)
    if tensor.ndim not in (2, 3):
        raise ValueError(f"MetaImage writing needs 2 or 3 spatial dims, got {tensor.ndim}")
    if geometry.ndim != tensor.ndim:
        raise ValueError("geometry rank does not match tensor rank")
    ndims = tensor.ndim
    data = np.ascontiguousarray(tensor).tobytes()
    if compressed:
        payload = zlib.compress(data, 6)
    else:
        payload = data

    local = path.endswith(".mha")
    if local:
        data_file = "LOCAL"
    else:
        ext = ".zraw" if compressed else ".raw"
        data_file = os.path.splitext(os.path.basename(path))[0] + ext

    mat = geometry.direction_matrix()[::-1, ::-1]
    lines = [
        "ObjectType = Image",
        f"NDims = {ndims}",
        "BinaryData = True",
        "BinaryDataByteOrderMSB = False",
        f"CompressedData = {compressed}",
    ]
    if compressed:
        lines.append(f"CompressedDataSize = {len(payload)}")
    lines += [
        f"TransformMatrix = {_format_floats(mat.ravel())}",
        f"Offset = {_format_floats(geometry.origin[::-1])}",
        f"ElementSpacing = {_format_floats(geometry.spacing[::-1])}",
        f"DimSize = {' '.join(str(d) for d in tensor.shape[::-1])}",
        f"ElementType = {_DTYPE_TO_MET[tensor.dtype.name]}",
        f"ElementDataFile = {data_file}",
    ]
    header = "\n".join(lines) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if local:
            fh.write(payload)
    if not local:
        with open(os.path.join(os.path.dirname(os.path.abspath(path)), data_file), "wb") as fh:
            fh.write(payload)


_NPY_MAGIC = b"\x93NUMPY"

_DESCR_TO_DTYPE = {"|u1": "uint8", "<i4": "int32", "<f4": "float32", "<f8": "float64"}
_DTYPE_TO_DESCR = {v: k for k, v in _DESCR_TO_DTYPE.items()}


def _read_npy_header(fh, path: str):
    magic = fh.read(6)
    if magic != _NPY_MAGIC:
        raise FormatError(f"{path}: not a .npy file")
    version = fh.read(2)
    if version != b"\x01\x00":
        raise FormatError(f"{path}: only .npy version 1.0 is supported")
    (header_len,) = struct.unpack("<H", fh.read(2))
    try:
        meta = ast.literal_eval(fh.read(header_len).decode("ascii"))
    except (ValueError, SyntaxError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: malformed .npy header") from exc
    descr = meta.get("descr")
    if descr not in _DESCR_TO_DTYPE:
        raise FormatError(f"{path}: unsupported descr {descr!r}")
    if meta.get("fortran_order"):
        raise FormatError(f"{path}: fortran-order .npy files are not supported")
    shape = tuple(int(s) for s in meta.get("shape", ()))
    if len(shape) < 1:
        raise FormatError(f"{path}: 0-d arrays are not supported")
    return shape, _DESCR_TO_DTYPE[descr]


def read_npy_header(path: str) -> tuple[tuple[int, ...], str]:
    with open(path, "rb") as fh:
        return _read_npy_header(fh, path)


def read_npy(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        shape, dtype = _read_npy_header(fh, path)
        count = int(np.prod(shape))
        arr = np.fromfile(fh, dtype=np.dtype(dtype), count=count)
    if arr.size != count:
        raise CorruptFileError(f"{path}: payload truncated")
    return arr.reshape(shape)


def write_npy(tensor: np.ndarray, path: str) -> None:
    check_tensor(tensor)
    descr = _DTYPE_TO_DESCR[tensor.dtype.name]
    shape_repr = "(" + ", ".join(str(d) for d in tensor.shape) + ("," if tensor.ndim == 1 else "") + ")"
    meta = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_repr}, }}"
    # pad so that magic+version+len+header is a multiple of 64, newline-terminated
    unpadded = len(_NPY_MAGIC) + 2 + 2 + len(meta) + 1
    pad = (64 - unpadded % 64) % 64
    header = meta + " " * pad + "\n"
    with open(path, "wb") as fh:
        fh.write(_NPY_MAGIC)
        fh.write(b"\x01\x00")
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(tensor).tobytes())


def hash_file(path: str) -> str:
    """SHA-256 of the file bytes, lowercase hex."""
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def read_image(path: str) -> tuple[np.ndarray, ImageGeometry]:
    """Dispatch on extension: MetaImage or .npy (identity geometry)."""
    if path.endswith((".mha", ".mhd")):
        return read_metaimage(path)
    if path.endswith(".npy"):
        arr = read_npy(path)
        return arr, ImageGeometry.identity(arr.ndim)
    raise FormatError(f"{path}: unsupported image format")


def read_image_header(path: str) -> tuple[tuple[int, ...], str, ImageGeometry]:
    if path.endswith((".mha", ".mhd")):
        return read_metaimage_header(path)
    if path.endswith(".npy"):
        shape, dtype = read_npy_header(path)
        return shape, dtype, ImageGeometry.identity(len(shape))
    raise FormatError(f"{path}: unsupported image format")
