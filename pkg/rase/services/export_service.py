"""结果导出服务 - 映射二进制格式、JSON 元数据与 CSV"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from rase.models.maps import BogoliubovMap
from rase.models.moments import MomentSet
from rase.services.kernel_service import verify_symplectic

logger = logging.getLogger(__name__)

MAP_MAGIC = b"RASEMAP1"
PathLike = Union[str, Path]


def write_map(bmap: BogoliubovMap, path: PathLike) -> Path:
    """头部 RASEMAP1 + uint64 rows, cols，随后按行主序写 complex128 的 C 与 S"""
    path = Path(path)
    rows, cols = bmap.particle_block.shape
    with path.open("wb") as handle:
        handle.write(MAP_MAGIC)
        handle.write(struct.pack("<QQ", rows, cols))
        handle.write(np.ascontiguousarray(bmap.particle_block, dtype="<c16").tobytes())
        handle.write(np.ascontiguousarray(bmap.conjugate_block, dtype="<c16").tobytes())
    logger.debug("wrote %dx%d map to %s", rows, cols, path)
    return path


def read_map(path: PathLike) -> BogoliubovMap:
    payload = Path(path).read_bytes()
    if payload[:8] != MAP_MAGIC:
        raise ValueError(f"{path} is not a map file")
    rows, cols = struct.unpack("<QQ", payload[8:24])
    count = rows * cols
    body = np.frombuffer(payload[24:], dtype="<c16")
    if len(body) != 2 * count:
        raise ValueError(f"{path} is truncated: expected {2 * count} entries, found {len(body)}")
    return BogoliubovMap.from_blocks(body[:count].reshape(rows, cols), body[count:].reshape(rows, cols))


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, default=_jsonable), encoding="utf-8")
    return path


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_csv(frame: pd.DataFrame, path: PathLike, digest: str) -> Path:
    """首行写入配置哈希注释，正文固定浮点格式以保证重跑逐字节一致"""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# config_sha256={digest}\n")
        frame.to_csv(handle, index=False, float_format="%.12e", lineterminator="\n")
    return path


def read_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def moment_frame(moments: MomentSet) -> pd.DataFrame:
    """矩的长表：t_i, t_j, n_i, Re/Im g, Re/Im m"""
    n = len(moments.bins)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    return pd.DataFrame({
        "t_i": moments.bins[i],
        "t_j": moments.bins[j],
        "n_i": moments.flux[i],
        "g_re": moments.coherence[i, j].real,
        "g_im": moments.coherence[i, j].imag,
        "m_re": moments.anomalous[i, j].real,
        "m_im": moments.anomalous[i, j].imag,
    })


def map_metadata(bmap: BogoliubovMap, digest: str) -> Dict[str, Any]:
    """二进制映射的 JSON 说明：格式、维度、输入模账本与辛残差"""
    rows, cols = bmap.particle_block.shape
    return {
        "format": "RASEMAP1, <u64 rows, u64 cols>, row-major complex128 particle block, then conjugate block",
        "config_sha256": digest,
        "rows": rows,
        "cols": cols,
        "alpha_l": bmap.alpha_l,
        "regime_after": bmap.ensemble.regime,
        "pulse_boundaries": list(bmap.ensemble.pulse_boundaries),
        "output_bins": bmap.output_bins,
        "symplectic_residual": verify_symplectic(bmap),
        "ledger": [entry.model_dump() for entry in bmap.input_ledger.entries],
    }
