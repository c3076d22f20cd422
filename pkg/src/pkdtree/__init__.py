"""Parallel batch-dynamic kd-tree."""

from .construct import BucketPartition, Skeleton, build, build_skeleton, flatten, plain_build, sample, sieve
from .core import (
    Box,
    BoxRelation,
    Config,
    HeavyLeaf,
    Interior,
    Leaf,
    Splitter,
    box_relation,
    split_box,
    squared_distance,
    structure_hash,
    tree_height,
    widest_dimension,
)
from .datagen import GenSpec, gen_uniform, gen_varden, generate
from .oracle import Violation, brute_knn, brute_range_count, brute_range_report, check_tree
from .parallel import get_num_threads, num_threads, set_num_threads
from .query import KnnBuffer, knn, range_count, range_report
from .tree import PkdTree
from .update import UpdateStats, batch_delete, batch_insert, extract_skeleton, is_balanced

__all__ = [
    "Box",
    "BoxRelation",
    "BucketPartition",
    "Config",
    "GenSpec",
    "HeavyLeaf",
    "Interior",
    "KnnBuffer",
    "Leaf",
    "PkdTree",
    "Skeleton",
    "Splitter",
    "UpdateStats",
    "Violation",
    "batch_delete",
    "batch_insert",
    "box_relation",
    "brute_knn",
    "brute_range_count",
    "brute_range_report",
    "build",
    "build_skeleton",
    "check_tree",
    "extract_skeleton",
    "flatten",
    "gen_uniform",
    "gen_varden",
    "generate",
    "get_num_threads",
    "is_balanced",
    "knn",
    "num_threads",
    "plain_build",
    "range_count",
    "range_report",
    "sample",
    "set_num_threads",
    "sieve",
    "split_box",
    "squared_distance",
    "structure_hash",
    "tree_height",
    "widest_dimension",
]
