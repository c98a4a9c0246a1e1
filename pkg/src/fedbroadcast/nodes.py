"""Node identifiers, node sets and their canonical ordering/rendering."""

from typing import AbstractSet, Hashable, Iterable, Tuple, Union

NodeId = Union[int, str]
NodeSet = frozenset


def node_key(n) -> tuple:
    # ints sort before strings; both sort naturally within their kind
    if isinstance(n, bool):
        raise TypeError(f"bool is not a valid node id: {n!r}")
    if isinstance(n, int):
        return (0, n, "")
    return (1, 0, str(n))


def sort_nodes(nodes: Iterable) -> Tuple:
    return tuple(sorted(nodes, key=node_key))


def set_key(s: AbstractSet) -> tuple:
    """Canonical order for node sets: by size, then lexicographically."""
    return (len(s), tuple(node_key(n) for n in sort_nodes(s)))


def sort_sets(sets: Iterable[AbstractSet]) -> Tuple[frozenset, ...]:
    return tuple(sorted((frozenset(s) for s in sets), key=set_key))


def nodeset(xs: Iterable[Hashable] = ()) -> frozenset:
    return frozenset(xs)


def fmt_node(n) -> str:
    return str(n)


def fmt_set(s: AbstractSet) -> str:
    return "{" + ",".join(fmt_node(n) for n in sort_nodes(s)) + "}"


def fmt_family(sets: Iterable[AbstractSet]) -> str:
    return "{" + ",".join(fmt_set(s) for s in sort_sets(sets)) + "}"


def value_key(v) -> tuple:
    return (type(v).__name__, str(v))
