"""Point-cloud and pose-file readers and writers.

Cloud formats: PLY (ascii, binary little/big endian), PCD (ascii, binary),
whitespace-separated XYZ text and KITTI velodyne ``.bin`` (packed float32
x, y, z, reflectance). Pose formats: KITTI rows of 12 numbers (row-major
3x4) and TUM rows ``timestamp tx ty tz qx qy qz qw``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import ParseError
from .geom import RigidTransform, quaternion_to_rotation

CLOUD_FORMATS = ("ply", "pcd", "xyz", "kitti-bin")
POSE_FORMATS = ("kitti-12", "tum-8")

_EXTENSIONS = {".ply": "ply", ".pcd": "pcd", ".xyz": "xyz", ".txt": "xyz", ".bin": "kitti-bin"}

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def cloud_format(path, fmt=None) -> str:
    if fmt is not None:
        if fmt not in CLOUD_FORMATS:
            raise ValueError(f"unknown cloud format {fmt!r}; choose from {CLOUD_FORMATS}")
        return fmt
    ext = Path(path).suffix.lower()
    if ext not in _EXTENSIONS:
        raise ValueError(f"cannot infer cloud format from extension {ext!r}; pass fmt explicitly")
    return _EXTENSIONS[ext]


def load_cloud(path, fmt=None) -> PointCloud:
    """Read the x, y, z coordinates of a cloud file; other attributes are dropped.

    Raises
    ------
    ParseError
        On malformed headers, truncated payloads or an empty result.
    """
    fmt = cloud_format(path, fmt)
    data = Path(path).read_bytes()
    reader = {"ply": _read_ply, "pcd": _read_pcd, "xyz": _read_xyz, "kitti-bin": _read_kitti_bin}[fmt]
    pts = reader(data, path)
    if pts.shape[0] == 0:
        raise ParseError("file contains no points", path=path, offset=len(data))
    if not np.all(np.isfinite(pts)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(pts), axis=1))[0])
        raise ParseError(f"non-finite coordinates at point {bad}", path=path)
    return PointCloud(pts)


def _header_lines(data: bytes, path, terminator: bytes, first_magic: bytes | None = None):
    """Split off an ASCII header ending with the ``terminator`` line."""
    lines, pos = [], 0
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise ParseError("header is not terminated", path=path, offset=pos)
        raw = data[pos:end].rstrip(b"\r")
        try:
            line = raw.decode("ascii").strip()
        except UnicodeDecodeError:
            raise ParseError("non-ASCII bytes in header", path=path, offset=pos) from None
        lines.append((pos, line))
        pos = end + 1
        if first_magic is not None and len(lines) == 1 and raw.strip() != first_magic:
            raise ParseError(f"missing {first_magic.decode()!r} magic line", path=path, offset=0)
        # PCD ends at "DATA <mode>", PLY at a bare "end_header"
        if line.split(" ", 1)[0] == terminator.decode():
            return lines, pos


def _read_ply(data: bytes, path) -> np.ndarray:
    lines, body = _header_lines(data, path, b"end_header", first_magic=b"ply")
    fmt = None
    elements = []  # (name, count, [(prop, dtype | None for list)])
    for off, line in lines[1:-1]:
        if not line or line.startswith(("comment", "obj_info")):
            continue
        tok = line.split()
        if tok[0] == "format":
            if len(tok) < 2 or tok[1] not in ("ascii", "binary_little_endian", "binary_big_endian"):
                raise ParseError(f"unsupported PLY format line {line!r}", path=path, offset=off)
            fmt = tok[1]
        elif tok[0] == "element":
            try:
                elements.append((tok[1], int(tok[2]), []))
            except (IndexError, ValueError):
                raise ParseError(f"bad element line {line!r}", path=path, offset=off) from None
        elif tok[0] == "property":
            if not elements:
                raise ParseError("property before any element", path=path, offset=off)
            if len(tok) >= 2 and tok[1] == "list":
                elements[-1][2].append((tok[-1], None))
            elif len(tok) == 3 and tok[1] in _PLY_TYPES:
                elements[-1][2].append((tok[2], _PLY_TYPES[tok[1]]))
            else:
                raise ParseError(f"bad property line {line!r}", path=path, offset=off)
        else:
            raise ParseError(f"unexpected header line {line!r}", path=path, offset=off)
    if fmt is None:
        raise ParseError("missing format line", path=path, offset=0)
    names = [e[0] for e in elements]
    if "vertex" not in names:
        raise ParseError("no vertex element", path=path, offset=body)
    vi = names.index("vertex")
    _, count, props = elements[vi]
    pnames = [p[0] for p in props]
    for axis in "xyz":
        if axis not in pnames:
            raise ParseError(f"vertex element lacks property {axis!r}", path=path, offset=body)
    if any(dt is None for _, dt in props):
        raise ParseError("list properties on vertices are not supported", path=path, offset=body)

    if fmt == "ascii":
        skip = sum(e[1] for e in elements[:vi])
        text = data[body:].decode("ascii", errors="replace").splitlines()
        rows = [ln for ln in text if ln.strip()]
        first_line = data[:body].count(b"\n") + 1
        if len(rows) < skip + count:
            raise ParseError(f"expected {count} vertices, file ends early", path=path, offset=len(data))
        cols = [pnames.index(a) for a in "xyz"]
        out = np.empty((count, 3))
        for i in range(count):
            tok = rows[skip + i].split()
            try:
                out[i] = [float(tok[c]) for c in cols]
                if len(tok) != len(pnames):
                    raise ValueError
            except (ValueError, IndexError):
                raise ParseError(f"bad vertex row {rows[skip + i]!r}", path=path,
                                 line=first_line + skip + i) from None
        return out

    endian = "<" if fmt == "binary_little_endian" else ">"
    offset = body
    for name, n, eprops in elements[:vi]:
        if any(dt is None for _, dt in eprops):
            raise ParseError(f"cannot skip list-valued element {name!r} before vertices",
                             path=path, offset=offset)
        offset += n * np.dtype([(p, endian + dt) for p, dt in eprops]).itemsize
    dtype = np.dtype([(p, endian + dt) for p, dt in props])
    need = offset + count * dtype.itemsize
    if len(data) < need:
        raise ParseError(f"truncated vertex payload: need {need} bytes, have {len(data)}",
                         path=path, offset=len(data))
    rec = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
    return np.column_stack([rec[a].astype(np.float64) for a in "xyz"])


_PCD_TYPES = {("F", 4): "f4", ("F", 8): "f8", ("I", 1): "i1", ("I", 2): "i2", ("I", 4): "i4",
              ("I", 8): "i8", ("U", 1): "u1", ("U", 2): "u2", ("U", 4): "u4", ("U", 8): "u8"}


def _read_pcd(data: bytes, path) -> np.ndarray:
    lines, body = _header_lines(data, path, b"DATA")
    head = {}
    for off, line in lines:
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        head[key.upper()] = (off, rest.split())
    for key in ("FIELDS", "SIZE", "TYPE", "POINTS", "DATA"):
        if key not in head:
            raise ParseError(f"missing {key} header line", path=path, offset=body)
    fields = head["FIELDS"][1]
    n_f = len(fields)
    counts = [int(c) for c in head["COUNT"][1]] if "COUNT" in head else [1] * n_f
    sizes, types = head["SIZE"][1], head["TYPE"][1]
    if not (len(sizes) == len(types) == len(counts) == n_f):
        raise ParseError("FIELDS/SIZE/TYPE/COUNT lengths differ", path=path, offset=head["FIELDS"][0])
    for axis in "xyz":
        if axis not in fields:
            raise ParseError(f"FIELDS lacks {axis!r}", path=path, offset=head["FIELDS"][0])
    try:
        n_pts = int(head["POINTS"][1][0])
        layout = [(f, _PCD_TYPES[(t.upper(), int(s))], c) for f, s, t, c in zip(fields, sizes, types, counts)]
    except (KeyError, ValueError, IndexError):
        raise ParseError("bad POINTS/SIZE/TYPE header", path=path, offset=head["SIZE"][0]) from None
    mode = head["DATA"][1][0].lower() if head["DATA"][1] else ""

    if mode == "ascii":
        text = data[body:].decode("ascii", errors="replace").splitlines()
        rows = [ln for ln in text if ln.strip()]
        if len(rows) < n_pts:
            raise ParseError(f"expected {n_pts} points, file ends early", path=path, offset=len(data))
        starts = np.cumsum([0] + counts[:-1])
        cols = [int(starts[fields.index(a)]) for a in "xyz"]
        first_line = data[:body].count(b"\n") + 1
        out = np.empty((n_pts, 3))
        for i in range(n_pts):
            tok = rows[i].split()
            try:
                out[i] = [float(tok[c]) for c in cols]
            except (ValueError, IndexError):
                raise ParseError(f"bad point row {rows[i]!r}", path=path, line=first_line + i) from None
    elif mode == "binary":
        dtype = np.dtype([(f, "<" + t, (c,)) if c > 1 else (f, "<" + t) for f, t, c in layout])
        need = body + n_pts * dtype.itemsize
        if len(data) < need:
            raise ParseError(f"truncated binary payload: need {need} bytes, have {len(data)}",
                             path=path, offset=len(data))
        rec = np.frombuffer(data, dtype=dtype, count=n_pts, offset=body)
        out = np.column_stack([rec[a].astype(np.float64) for a in "xyz"])
    else:
        raise ParseError(f"unsupported PCD DATA mode {mode!r}", path=path, offset=head["DATA"][0])
    # organised clouds mark missing returns with NaN
    return out[np.all(np.isfinite(out), axis=1)]


def _read_xyz(data: bytes, path) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(data.decode("utf-8", errors="replace").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.replace(",", " ").split()
        try:
            if len(tok) < 3:
                raise ValueError
            rows.append((float(tok[0]), float(tok[1]), float(tok[2])))
        except ValueError:
            raise ParseError(f"expected at least 3 numbers, got {raw.strip()!r}", path=path, line=lineno) from None
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _read_kitti_bin(data: bytes, path) -> np.ndarray:
    if len(data) % 16:
        raise ParseError(f"size {len(data)} is not a multiple of 16 bytes", path=path,
                         offset=len(data) - len(data) % 16)
    scan = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    return scan[:, :3].astype(np.float64)


def save_cloud(path, cloud: PointCloud, fmt=None, binary: bool = False) -> None:
    """Write a cloud. PLY/PCD use float64 fields; kitti-bin stores float32."""
    fmt = cloud_format(path, fmt)
    pts = np.ascontiguousarray(cloud.points, dtype=np.float64)
    n = pts.shape[0]
    if fmt == "ply":
        kind = "binary_little_endian" if binary else "ascii"
        header = (f"ply\nformat {kind} 1.0\nelement vertex {n}\n"
                  "property double x\nproperty double y\nproperty double z\nend_header\n")
        if binary:
            payload = pts.astype("<f8").tobytes()
        else:
            payload = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist()).encode()
        Path(path).write_bytes(header.encode() + payload)
    elif fmt == "pcd":
        header = (f"# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\nFIELDS x y z\n"
                  f"SIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\nWIDTH {n}\nHEIGHT 1\n"
                  f"VIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA {'binary' if binary else 'ascii'}\n")
        if binary:
            payload = pts.astype("<f8").tobytes()
        else:
            payload = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist()).encode()
        Path(path).write_bytes(header.encode() + payload)
    elif fmt == "xyz":
        Path(path).write_text("".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in pts.tolist()))
    else:
        scan = np.zeros((n, 4), dtype="<f4")
        scan[:, :3] = pts
        Path(path).write_bytes(scan.tobytes())


def _orthonormalize(R: np.ndarray, path, lineno) -> np.ndarray:
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-4 or np.linalg.det(R) <= 0:
        raise ParseError("rotation block is not orthonormal within 1e-4", path=path, line=lineno)
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def load_poses(path, fmt=None, return_timestamps: bool = False):
    """Parse a KITTI or TUM trajectory into a list of transforms (file order kept).

    The format is inferred from the column count of the first data row
    unless ``fmt`` is given. Rotations are re-projected onto SO(3) after
    the tolerance check.
    """
    if fmt is not None and fmt not in POSE_FORMATS:
        raise ValueError(f"unknown pose format {fmt!r}; choose from {POSE_FORMATS}")
    poses, stamps = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals = [float(v) for v in line.split()]
        except ValueError:
            raise ParseError(f"non-numeric pose row {raw.strip()!r}", path=path, line=lineno) from None
        if fmt is None:
            fmt = {12: "kitti-12", 8: "tum-8"}.get(len(vals))
            if fmt is None:
                raise ParseError(f"cannot infer pose format from {len(vals)} columns", path=path, line=lineno)
        want = 12 if fmt == "kitti-12" else 8
        if len(vals) != want:
            raise ParseError(f"expected {want} columns, got {len(vals)}", path=path, line=lineno)
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite pose value", path=path, line=lineno)
        if fmt == "kitti-12":
            M = np.array(vals).reshape(3, 4)
            poses.append(RigidTransform(_orthonormalize(M[:, :3], path, lineno), M[:, 3]))
            stamps.append(float(len(stamps)))
        else:
            q = np.array(vals[4:8])
            norm = np.linalg.norm(q)
            if abs(norm - 1.0) > 1e-3:
                raise ParseError(f"quaternion norm {norm:.6f} is not 1 within 1e-3", path=path, line=lineno)
            poses.append(RigidTransform(quaternion_to_rotation(*(q / norm)), vals[1:4]))
            stamps.append(vals[0])
    if return_timestamps:
        return poses, stamps
    return poses


def save_poses(path, poses, fmt: str = "kitti-12", timestamps=None) -> None:
    lines = []
    for i, T in enumerate(poses):
        if fmt == "kitti-12":
            lines.append(" ".join(repr(float(v)) for v in T.as_matrix()[:3].reshape(-1)))
        elif fmt == "tum-8":
            q = _rotation_to_quaternion(T.rotation)
            stamp = float(i if timestamps is None else timestamps[i])
            lines.append(" ".join(repr(float(v)) for v in [stamp, *T.translation, *q]))
        else:
            raise ValueError(f"unknown pose format {fmt!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _rotation_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit quaternion ``(qx, qy, qz, qw)`` with ``qw >= 0``."""
    w = np.sqrt(max(0.0, 1.0 + R[0, 0] + R[1, 1] + R[2, 2])) / 2
    x = np.sqrt(max(0.0, 1.0 + R[0, 0] - R[1, 1] - R[2, 2])) / 2
    y = np.sqrt(max(0.0, 1.0 - R[0, 0] + R[1, 1] - R[2, 2])) / 2
    z = np.sqrt(max(0.0, 1.0 - R[0, 0] - R[1, 1] + R[2, 2])) / 2
    x = np.copysign(x, R[2, 1] - R[1, 2])
    y = np.copysign(y, R[0, 2] - R[2, 0])
    z = np.copysign(z, R[1, 0] - R[0, 1])
    q = np.array([x, y, z, w])
    return q / np.linalg.norm(q)


def list_clouds(directory, pattern: str = "*") -> list:
    """Sorted cloud paths in ``directory`` matching ``pattern``."""
    return sorted(p for p in Path(directory).glob(pattern) if p.is_file())
