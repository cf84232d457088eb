"""
Simulated replicated block store.

Datasets are cut into fixed-size blocks and every block is copied onto
`replication` nodes. Nodes are keys of an in-memory map in test mode, or
directories under a store root in persistent mode:

    <root>/node<k>/<dataset_id>/block<index>    raw block bytes
    <root>/<dataset_id>.manifest                 block_index, offset, length, replica ids (TSV)

Reads are served by the lowest-numbered live replica. Failing a node makes
every replica it holds unreadable until it is revived.
"""

import logging
import os
import threading
from typing import BinaryIO, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Set, Tuple

from mrloglab.common import BlockUnavailable, InvalidClusterSpec, ReplicationInfeasible

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 64 * 1024 * 1024
MIN_BLOCK_SIZE = 1024
NEWLINE = b"\n"


class ClusterSpec(NamedTuple):
    """Shape of the simulated cluster."""
    node_count: int = 4
    replication: int = 2
    block_size_bytes: int = DEFAULT_BLOCK_SIZE

    def validate(self) -> "ClusterSpec":
        if self.node_count <= 0:
            raise InvalidClusterSpec(f"node_count must be positive, got {self.node_count}")
        if self.replication <= 0:
            raise InvalidClusterSpec(f"replication must be positive, got {self.replication}")
        if self.replication > self.node_count:
            raise ReplicationInfeasible(
                f"replication {self.replication} exceeds node count {self.node_count}")
        if self.block_size_bytes < MIN_BLOCK_SIZE:
            raise InvalidClusterSpec(
                f"block size must be at least {MIN_BLOCK_SIZE} bytes, got {self.block_size_bytes}")
        return self


class Block(NamedTuple):
    """One stored byte range of a dataset."""
    block_index: int
    byte_offset: int
    byte_length: int
    replica_nodes: FrozenSet[int]

    @property
    def end(self) -> int:
        return self.byte_offset + self.byte_length


class DatasetRef(NamedTuple):
    """Handle to an ingested dataset."""
    dataset_id: str
    blocks: Tuple[Block, ...]
    total_bytes: int
    format: Optional[object] = None  # LogFormatDescriptor when known

    def with_format(self, descriptor) -> "DatasetRef":
        return self._replace(format=descriptor)


class NodeState(NamedTuple):
    node_id: int
    alive: bool


class Split(NamedTuple):
    """Line-aligned input of one map task; `block_index` names the block it starts in."""
    block_index: int
    start: int
    end: int


class MemoryBackend:
    """Block bytes kept in a dict keyed by (node, dataset, block)."""

    def __init__(self):
        self._blocks: Dict[Tuple[int, str, int], bytes] = {}
        self._manifests: Dict[str, str] = {}

    def put(self, node_id: int, dataset_id: str, block_index: int, data: bytes):
        self._blocks[(node_id, dataset_id, block_index)] = data

    def get(self, node_id: int, dataset_id: str, block_index: int) -> bytes:
        return self._blocks[(node_id, dataset_id, block_index)]

    def put_manifest(self, dataset_id: str, text: str):
        self._manifests[dataset_id] = text

    def get_manifest(self, dataset_id: str) -> str:
        try:
            return self._manifests[dataset_id]
        except KeyError:
            raise FileNotFoundError(f"no dataset {dataset_id!r} in memory store") from None


class DirectoryBackend:
    """Block bytes stored as files, one directory per node."""

    def __init__(self, root: str):
        self.root = os.path.abspath(root)
        os.makedirs(self.root, exist_ok=True)

    def _block_path(self, node_id: int, dataset_id: str, block_index: int) -> str:
        return os.path.join(self.root, f"node{node_id}", dataset_id, f"block{block_index}")

    def put(self, node_id: int, dataset_id: str, block_index: int, data: bytes):
        path = self._block_path(node_id, dataset_id, block_index)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "wb") as f:
            f.write(data)

    def get(self, node_id: int, dataset_id: str, block_index: int) -> bytes:
        with open(self._block_path(node_id, dataset_id, block_index), "rb") as f:
            return f.read()

    def manifest_path(self, dataset_id: str) -> str:
        return os.path.join(self.root, f"{dataset_id}.manifest")

    def put_manifest(self, dataset_id: str, text: str):
        with open(self.manifest_path(dataset_id), "w") as f:
            f.write(text)

    def get_manifest(self, dataset_id: str) -> str:
        with open(self.manifest_path(dataset_id), "r") as f:
            return f.read()


class Cluster:
    """
    Mutable cluster state: its ClusterSpec, node liveness and block storage.

    Liveness is guarded by a lock so a read observes a failure atomically.
    """

    def __init__(self, spec: ClusterSpec = ClusterSpec(), store_root: Optional[str] = None):
        self.spec = spec.validate()
        self.backend = DirectoryBackend(store_root) if store_root else MemoryBackend()
        self._alive = [True] * spec.node_count
        self._lock = threading.Lock()

    @property
    def nodes(self) -> List[NodeState]:
        with self._lock:
            return [NodeState(i, alive) for i, alive in enumerate(self._alive)]

    def is_alive(self, node_id: int) -> bool:
        with self._lock:
            return self._alive[node_id]

    def live_replica(self, block: Block) -> Optional[int]:
        """Lowest live node holding the block, or None."""
        with self._lock:
            live = [node for node in block.replica_nodes if self._alive[node]]
        return min(live) if live else None

    def set_alive(self, node_id: int, alive: bool):
        if not 0 <= node_id < self.spec.node_count:
            raise ValueError(f"node id {node_id} out of range [0, {self.spec.node_count})")
        with self._lock:
            self._alive[node_id] = alive


def fail_node(cluster: Cluster, node_id: int) -> Cluster:
    """Mark a node dead. Failing a dead node again changes nothing."""
    if cluster.is_alive(node_id):
        logger.warning(f"Node {node_id} failed")
    cluster.set_alive(node_id, False)
    return cluster


def revive_node(cluster: Cluster, node_id: int) -> Cluster:
    cluster.set_alive(node_id, True)
    return cluster


def place_replicas(block_index: int, spec: ClusterSpec) -> FrozenSet[int]:
    """Round-robin placement starting at block_index mod node_count."""
    count = min(spec.replication, spec.node_count)
    return frozenset((block_index + i) % spec.node_count for i in range(count))


def _manifest_text(blocks: Iterable[Block]) -> str:
    lines = []
    for block in blocks:
        replicas = ",".join(str(node) for node in sorted(block.replica_nodes))
        lines.append(f"{block.block_index}\t{block.byte_offset}\t{block.byte_length}\t{replicas}\n")
    return "".join(lines)


def ingest(byte_stream: BinaryIO, cluster: Cluster, dataset_id: str = "dataset") -> DatasetRef:
    """
    Split a byte stream into blocks and store every block on its replica nodes.

    Args:
        byte_stream: Readable binary stream
        cluster: Cluster to store into
        dataset_id: Name of the dataset in the store

    Returns:
        Handle to the stored dataset
    """
    spec = cluster.spec
    if spec.replication > spec.node_count:
        raise ReplicationInfeasible(f"replication {spec.replication} exceeds node count {spec.node_count}")

    blocks = []
    offset = 0
    while True:
        data = byte_stream.read(spec.block_size_bytes)
        if not data:
            break
        # Short reads from pipes: top the block up to full size
        while len(data) < spec.block_size_bytes:
            more = byte_stream.read(spec.block_size_bytes - len(data))
            if not more:
                break
            data += more
        index = len(blocks)
        replicas = place_replicas(index, spec)
        for node in sorted(replicas):
            cluster.backend.put(node, dataset_id, index, data)
        blocks.append(Block(index, offset, len(data), replicas))
        offset += len(data)

    cluster.backend.put_manifest(dataset_id, _manifest_text(blocks))
    logger.info(f"Ingested {dataset_id}: {offset} bytes in {len(blocks)} blocks")
    return DatasetRef(dataset_id, tuple(blocks), offset)


def ingest_file(path: str, cluster: Cluster, dataset_id: Optional[str] = None) -> DatasetRef:
    """Ingest a file; the dataset id defaults to a sanitized file name."""
    if dataset_id is None:
        dataset_id = dataset_id_for(path)
    with open(path, "rb") as f:
        return ingest(f, cluster, dataset_id)


def dataset_id_for(path: str) -> str:
    name = os.path.basename(path) or "dataset"
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def load_dataset(cluster: Cluster, dataset_id: str) -> DatasetRef:
    """Rebuild a dataset handle from its stored manifest."""
    blocks = []
    for line in cluster.backend.get_manifest(dataset_id).splitlines():
        if not line.strip():
            continue
        index, offset, length, replicas = line.split("\t")
        nodes = frozenset(int(node) for node in replicas.split(",") if node)
        blocks.append(Block(int(index), int(offset), int(length), nodes))
    total = blocks[-1].end if blocks else 0
    return DatasetRef(dataset_id, tuple(blocks), total)


def read_block(dataset: DatasetRef, block_index: int, cluster: Cluster) -> bytes:
    """Bytes of one block from its lowest live replica."""
    data, _ = _read_block_from(dataset, block_index, cluster)
    return data


def _read_block_from(dataset: DatasetRef, block_index: int, cluster: Cluster) -> Tuple[bytes, int]:
    if not 0 <= block_index < len(dataset.blocks):
        raise IndexError(f"block {block_index} out of range for {dataset.dataset_id}")
    block = dataset.blocks[block_index]
    node = cluster.live_replica(block)
    if node is None:
        raise BlockUnavailable(dataset.dataset_id, block_index)
    return cluster.backend.get(node, dataset.dataset_id, block_index), node


def is_fully_readable(dataset: DatasetRef, cluster: Cluster) -> bool:
    return all(cluster.live_replica(block) is not None for block in dataset.blocks)


def splits_for_map(dataset: DatasetRef) -> List[Split]:
    """One split per block; line ownership is settled when the split is read."""
    return [Split(block.block_index, block.byte_offset, block.end) for block in dataset.blocks]


class SplitReader:
    """
    Reads the lines owned by one split.

    A line belongs to the split holding its first byte: a split skips a
    leading partial line (unless it starts the dataset) and keeps reading
    into the following blocks to finish its last line. The nodes that served
    each block are remembered so a task can tell whether any of them died.
    """

    def __init__(self, dataset: DatasetRef, cluster: Cluster):
        self.dataset = dataset
        self.cluster = cluster
        self.nodes_used: Set[int] = set()
        self._cache: Dict[int, bytes] = {}

    def _block(self, index: int) -> bytes:
        if index not in self._cache:
            data, node = _read_block_from(self.dataset, index, self.cluster)
            self.nodes_used.add(node)
            self._cache[index] = data
        return self._cache[index]

    def read(self, split: Split) -> List[Tuple[int, str]]:
        """
        Lines owned by the split.

        Returns:
            (byte offset of the line, decoded line without its ending) pairs
        """
        index = split.block_index
        data = self._block(index)
        position = 0  # relative to the split start

        if index > 0 and not self._block(index - 1).endswith(NEWLINE):
            newline = data.find(NEWLINE)
            if newline < 0 or newline + 1 >= len(data):
                # The previous split's last line covers the rest of this block
                return []
            position = newline + 1

        lines = []
        buffer = data
        buffer_start = split.start
        cursor = split.start + position
        next_block = split.block_index + 1
        while cursor < split.end:
            relative = cursor - buffer_start
            newline = buffer.find(NEWLINE, relative)
            while newline < 0 and next_block < len(self.dataset.blocks):
                buffer = buffer[relative:] + self._block(next_block)
                buffer_start = cursor
                relative = 0
                next_block += 1
                newline = buffer.find(NEWLINE)
            if newline < 0:
                raw = buffer[relative:]
                if raw:
                    lines.append((cursor, _decode(raw)))
                break
            lines.append((cursor, _decode(buffer[relative:newline])))
            cursor = buffer_start + newline + 1
        return lines


def _decode(raw: bytes) -> str:
    if raw.endswith(b"\r"):
        raw = raw[:-1]
    return raw.decode("utf-8", errors="replace")


def read_split(dataset: DatasetRef, split: Split, cluster: Cluster) -> Tuple[List[Tuple[int, str]], Set[int]]:
    """Lines of a split plus the nodes that served them."""
    reader = SplitReader(dataset, cluster)
    return reader.read(split), reader.nodes_used


def read_all_lines(dataset: DatasetRef, cluster: Cluster) -> List[Tuple[int, str]]:
    """Every line of a dataset in order, split by split."""
    reader = SplitReader(dataset, cluster)
    lines = []
    for split in splits_for_map(dataset):
        lines.extend(reader.read(split))
    return lines
