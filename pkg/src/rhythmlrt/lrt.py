"""Linearized rhythm trees and the aligned tree positional encoding.

A rhythm tree is flattened by pre-order depth-first traversal. Each node
becomes one row of ``rule_count + instrument_count`` values: a one-hot
rule identifier followed by the per-instrument velocities (all zero for
internal nodes). The traversal is invertible given the per-rule arities,
and :func:`delinearize_lrt` performs that inversion.

The tree positional encoding gives every node, in the same row order, a
vector of ``2 * max_depth`` integers describing its path from the root:
the 1-based child index taken at each step, then, mirrored in the second
half, the sibling count at each step. The root contributes (1, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EncodingError
from .trees import (
    ROOT_ID,
    SIMPLIFIED_ARITIES,
    SIMPLIFIED_RULE_COUNT,
    DEFAULT_INSTRUMENT_COUNT,
    RhythmNode,
    RhythmTree,
)

DEFAULT_MAX_DEPTH = 8  # global root + measure + six division levels


@dataclass(frozen=True)
class LrtMatrix:
    """Pre-order one-hot rule rows with velocity blocks."""

    data: np.ndarray  # (T, rule_count + instrument_count) float64
    node_order: tuple[RhythmNode, ...]
    rule_count: int
    instrument_count: int

    def __len__(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class TbpeMatrix:
    """Per-node path encoding aligned row-for-row with the LRT matrix."""

    data: np.ndarray  # (T, 2 * max_depth) int32
    max_depth: int

    def __len__(self) -> int:
        return self.data.shape[0]


def linearize_lrt(
    tree: RhythmTree,
    rule_count: int = SIMPLIFIED_RULE_COUNT,
    instrument_count: int = DEFAULT_INSTRUMENT_COUNT,
) -> LrtMatrix:
    """Flatten a rhythm tree into its pre-order matrix form."""
    nodes = tree.preorder()
    data = np.zeros((len(nodes), rule_count + instrument_count))
    for row, node in enumerate(nodes):
        if not 0 <= node.id < rule_count:
            raise EncodingError(f"rule id {node.id} outside [0, {rule_count})")
        data[row, node.id] = 1.0
        if node.is_leaf:
            if node.velocities is None or len(node.velocities) != instrument_count:
                raise EncodingError(
                    f"leaf row {row} needs a velocity vector of length {instrument_count}"
                )
            data[row, rule_count:] = node.velocities
    return LrtMatrix(data, tuple(nodes), rule_count, instrument_count)


def _row_id(row: np.ndarray, rule_count: int, index: int) -> int:
    onehot = row[:rule_count]
    hits = np.flatnonzero(onehot == 1.0)
    if len(hits) != 1 or not np.all((onehot == 0.0) | (onehot == 1.0)):
        raise EncodingError(f"row {index} is not one-hot in its first {rule_count} entries")
    return int(hits[0])


def delinearize_lrt(
    matrix: LrtMatrix | np.ndarray,
    arity_table: dict[int, int] | None = None,
    rule_count: int = SIMPLIFIED_RULE_COUNT,
    instrument_count: int = DEFAULT_INSTRUMENT_COUNT,
) -> RhythmTree:
    """Rebuild the unique tree whose pre-order traversal is ``matrix``.

    ``arity_table`` maps rule ids to child counts; the global root's arity
    is not in the table and is inferred greedily, parsing measure subtrees
    until the rows run out. Raises :class:`EncodingError` when the row
    sequence is inconsistent with the arities.
    """
    if isinstance(matrix, LrtMatrix):
        data = matrix.data
        rule_count = matrix.rule_count
        instrument_count = matrix.instrument_count
    else:
        data = np.asarray(matrix)
    if data.ndim != 2 or data.shape[1] != rule_count + instrument_count:
        raise EncodingError(
            f"expected rows of width {rule_count + instrument_count}, got {data.shape}"
        )
    arities = dict(SIMPLIFIED_ARITIES if arity_table is None else arity_table)
    position = 0

    def build() -> RhythmNode:
        nonlocal position
        if position >= data.shape[0]:
            raise EncodingError("row sequence ended inside a subtree")
        row = data[position]
        node_id = _row_id(row, rule_count, position)
        position += 1
        if node_id == ROOT_ID:
            raise EncodingError(f"root id {ROOT_ID} found below row 0")
        if node_id not in arities:
            raise EncodingError(f"no arity known for rule id {node_id}")
        arity = arities[node_id]
        if arity == 0:
            return RhythmNode(node_id, (), tuple(row[rule_count:].tolist()))
        if np.any(row[rule_count:] != 0.0):
            raise EncodingError(f"internal row {position - 1} has a nonzero velocity block")
        return RhythmNode(node_id, tuple(build() for _ in range(arity)))

    if data.shape[0] == 0:
        raise EncodingError("empty matrix")
    root_id = _row_id(data[0], rule_count, 0)
    if root_id != ROOT_ID:
        raise EncodingError(f"row 0 must be the global root (id {ROOT_ID}), got {root_id}")
    if np.any(data[0, rule_count:] != 0.0):
        raise EncodingError("root row has a nonzero velocity block")
    position = 1
    measures = []
    while position < data.shape[0]:
        measures.append(build())
    return RhythmTree(RhythmNode(ROOT_ID, tuple(measures)))


def compute_tbpe(
    tree: RhythmTree,
    max_depth: int = DEFAULT_MAX_DEPTH,
    include_root: bool = True,
) -> TbpeMatrix:
    """Path-to-node encoding, one row per pre-order node.

    With ``include_root`` the path starts at the global root with child
    index 1 over sibling count 1; without it the path starts at the
    measure level (each measure indexed among its siblings). Raises
    :class:`EncodingError` when a node's path is longer than ``max_depth``.
    """
    rows: list[np.ndarray] = []

    def visit(node: RhythmNode, path: list[tuple[int, int]]):
        if len(path) > max_depth:
            raise EncodingError(
                f"node at depth {len(path)} exceeds max_depth {max_depth} "
                f"(pre-order row {len(rows)})"
            )
        row = np.zeros(2 * max_depth, dtype=np.int32)
        for step, (child_index, sibling_count) in enumerate(path):
            row[step] = child_index
            row[max_depth + step] = sibling_count
        rows.append(row)
        for index, child in enumerate(node.children, start=1):
            visit(child, path + [(index, len(node.children))])

    root_path = [(1, 1)] if include_root else []
    if include_root:
        visit(tree.root, root_path)
    else:
        row_count = len(tree.root.children)
        rows.append(np.zeros(2 * max_depth, dtype=np.int32))
        for index, child in enumerate(tree.root.children, start=1):
            visit(child, [(index, row_count)])
    return TbpeMatrix(np.vstack(rows) if rows else np.zeros((0, 2 * max_depth), np.int32), max_depth)
