"""GEMM task sequences: definition, file I/O, and bundled workloads."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class WorkloadError(ValueError):
    """Invalid workload definition."""


@dataclass(frozen=True)
class GemmOp:
    name: str
    M: int
    K: int
    N: int
    sync: bool = False
    shared_row: bool = False
    shared_col: bool = False
    bytes_per_element: int = 1

    def __post_init__(self):
        for dim in ("M", "K", "N", "bytes_per_element"):
            if getattr(self, dim) < 1:
                raise WorkloadError(f"op {self.name!r}: {dim} must be >= 1")
        if self.shared_row and self.shared_col:
            raise WorkloadError(f"op {self.name!r}: shared_row and shared_col are exclusive")

    @property
    def input_bytes(self) -> int:
        return self.M * self.K * self.bytes_per_element

    @property
    def weight_bytes(self) -> int:
        return self.K * self.N * self.bytes_per_element

    @property
    def output_bytes(self) -> int:
        return self.M * self.N * self.bytes_per_element


@dataclass(frozen=True)
class TaskSequence:
    ops: Tuple[GemmOp, ...]
    chain: Tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        chain = tuple(self.chain) if self.chain else (False,) * max(len(self.ops) - 1, 0)
        object.__setattr__(self, "chain", chain)
        if len(chain) != max(len(self.ops) - 1, 0):
            raise WorkloadError("chain must have one flag per consecutive op pair")
        for i, linked in enumerate(chain, start=1):
            if linked and self.ops[i - 1].N != self.ops[i].K:
                raise WorkloadError(f"chain dimension mismatch at op {i}")

    def __len__(self):
        return len(self.ops)

    def chained_pairs(self) -> List[int]:
        """Indices i such that op i feeds op i+1."""
        return [i for i, linked in enumerate(self.chain) if linked]


@dataclass(frozen=True)
class BatchSpec:
    batch_size: int = 1

    def __post_init__(self):
        if self.batch_size < 1:
            raise WorkloadError("batch_size must be >= 1")


def conv_to_gemm(cout, cin, kh, kw, hout, wout, name="conv", **kw_flags) -> GemmOp:
    """im2col lowering of a convolution layer."""
    for v in (cout, cin, kh, kw, hout, wout):
        if v < 1:
            raise WorkloadError("conv dimensions must be >= 1")
    return GemmOp(name, M=hout * wout, K=cin * kh * kw, N=cout, **kw_flags)


# --- file format -----------------------------------------------------------

_OP_KEYS = {"name", "m", "k", "n", "sync", "shared_row", "shared_col", "chain_prev",
            "bytes_per_element", "conv"}
_CONV_KEYS = ("cout", "cin", "kh", "kw", "hout", "wout")


def _op_lines(text: str) -> List[int]:
    return [i + 1 for i, line in enumerate(text.splitlines()) if re.match(r"\s*\[\[op\]\]", line)]


def parse_task(text: str, source: str = "<string>") -> TaskSequence:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise WorkloadError(f"{source}: {exc}") from None
    entries = doc.get("op")
    lines = _op_lines(text)
    if not entries:
        raise WorkloadError(f"{source}: no [[op]] entries")
    default_bpe = int(doc.get("bytes_per_element", 1))
    ops, chain = [], []
    for idx, entry in enumerate(entries):
        where = f"{source}:{lines[idx] if idx < len(lines) else '?'}"
        unknown = set(entry) - _OP_KEYS
        if unknown:
            raise WorkloadError(f"{where}: unknown key(s) {sorted(unknown)}")
        name = entry.get("name", f"op{idx}")
        flags = dict(
            sync=bool(entry.get("sync", False)),
            shared_row=bool(entry.get("shared_row", False)),
            shared_col=bool(entry.get("shared_col", False)),
            bytes_per_element=int(entry.get("bytes_per_element", default_bpe)),
        )
        try:
            if "conv" in entry:
                conv = entry["conv"]
                missing = [k for k in _CONV_KEYS if k not in conv]
                if missing:
                    raise WorkloadError(f"conv missing {missing}")
                op = conv_to_gemm(*(int(conv[k]) for k in _CONV_KEYS), name=name, **flags)
            else:
                missing = [k for k in ("m", "k", "n") if k not in entry]
                if missing:
                    raise WorkloadError(f"missing {missing}")
                op = GemmOp(name, int(entry["m"]), int(entry["k"]), int(entry["n"]), **flags)
        except WorkloadError as exc:
            raise WorkloadError(f"{where}: op {name!r}: {exc}") from None
        if idx > 0:
            chain.append(bool(entry.get("chain_prev", False)))
        elif entry.get("chain_prev", False):
            raise WorkloadError(f"{where}: first op cannot set chain_prev")
        ops.append(op)
    try:
        return TaskSequence(tuple(ops), tuple(chain))
    except WorkloadError as exc:
        m = re.search(r"at op (\d+)", str(exc))
        line = lines[int(m.group(1))] if m else "?"
        raise WorkloadError(f"{source}:{line}: {exc}") from None


def load_task(path) -> TaskSequence:
    path = Path(path)
    return parse_task(path.read_text(), source=str(path))


def dump_task(task: TaskSequence) -> str:
    out = []
    for i, op in enumerate(task.ops):
        out.append("[[op]]")
        out.append(f'name = "{op.name}"')
        out.append(f"m = {op.M}")
        out.append(f"k = {op.K}")
        out.append(f"n = {op.N}")
        for flag in ("sync", "shared_row", "shared_col"):
            if getattr(op, flag):
                out.append(f"{flag} = true")
        if op.bytes_per_element != 1:
            out.append(f"bytes_per_element = {op.bytes_per_element}")
        if i > 0 and task.chain[i - 1]:
            out.append("chain_prev = true")
        out.append("")
    return "\n".join(out)


# --- bundled workloads -----------------------------------------------------

def gemm_chain(k: int, M: int = 64, K: int = 64, N: int = 64, dims: Optional[Sequence[int]] = None) -> TaskSequence:
    """Synthetic chain of ``k`` GEMMs; ``dims`` gives K_0, N_0=K_1, ..., N_{k-1}."""
    if dims is None:
        dims = [K] + [N] * k
    if len(dims) != k + 1:
        raise WorkloadError("dims must have k+1 entries")
    ops = [GemmOp(f"g{i}", M, dims[i], dims[i + 1]) for i in range(k)]
    return TaskSequence(tuple(ops), (True,) * (k - 1))


def alexnet_mini() -> TaskSequence:
    """Eight-layer AlexNet analogue, every layer feeding the next.

    All conv layers share a 13x13 output grid (M=169). conv1 is
    im2col-lowered with its 11x11 window; later layers take the previous
    layer's channel count as K so consecutive outputs feed directly.
    """
    ops = [conv_to_gemm(48, 3, 11, 11, 13, 13, name="conv1")]
    channels = [48, 64, 96, 96, 64]
    for i in range(1, 5):
        ops.append(GemmOp(f"conv{i + 1}", 169, channels[i - 1], channels[i]))
    ops.append(GemmOp("fc6", 16, 64, 256))
    ops.append(GemmOp("fc7", 16, 256, 256))
    ops.append(GemmOp("fc8", 16, 256, 100))
    return TaskSequence(tuple(ops), (True,) * (len(ops) - 1))


def vit_block(tokens: int = 64, dim: int = 128, heads: int = 2, mlp: int = 256) -> TaskSequence:
    hd = dim // heads
    ops = [GemmOp("qkv", tokens, dim, 3 * dim)]
    for h in range(heads):
        # score and context GEMMs end at softmax / head merge
        ops.append(GemmOp(f"score{h}", tokens, hd, tokens, sync=True, shared_row=True))
        ops.append(GemmOp(f"context{h}", tokens, tokens, hd, sync=True, shared_row=True))
    ops.append(GemmOp("proj", tokens, dim, dim, sync=True))
    ops.append(GemmOp("mlp1", tokens, dim, mlp))
    ops.append(GemmOp("mlp2", tokens, mlp, dim, sync=True))
    chain = [False] * (len(ops) - 1)
    chain[-1] = True  # mlp1 -> mlp2
    return TaskSequence(tuple(ops), tuple(chain))


def bundled_tasks(chain_lengths: Sequence[int] = (2, 3, 4)) -> Dict[str, TaskSequence]:
    tasks = {"alexnet-mini": alexnet_mini(), "vit-block": vit_block()}
    for k in chain_lengths:
        tasks[f"gemm-chain-{k}"] = gemm_chain(k)
    return tasks


def resolve_task(name_or_path) -> TaskSequence:
    """Bundled workload by name (``gemm-chain-<k>`` accepted for any k) or a file path."""
    name = str(name_or_path)
    m = re.fullmatch(r"gemm-chain-(\d+)", name)
    if m:
        return gemm_chain(int(m.group(1)))
    tasks = bundled_tasks()
    if name in tasks:
        return tasks[name]
    return load_task(name)
