"""Graphviz export of a search tree snapshot.

Render with e.g. ``dot -Tsvg tree.dot -o tree.svg``.
"""
from __future__ import annotations

from collections import deque

from .search import SearchNode, SearchTree, Status


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _label(node: SearchNode) -> str:
    key = node.key.decode("utf-8", "backslashreplace") if isinstance(node.key, bytes) else str(node.key)
    q = f"{node.W / node.N_c:.6f}" if node.N_c else "-"
    return f"{key}|{q}|{node.N_c}|{node.N_p}|{node.status.value}"


def tree_to_dot(tree: SearchTree, name: str = "search") -> str:
    """Breadth-first DOT dump; children in insertion order, closed nodes filled grey."""
    ids: dict[int, str] = {}
    lines = [f"digraph {name} {{", '  node [shape=box, fontname="monospace"];']
    edges = []
    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        nid = ids.setdefault(id(node), f"n{len(ids)}")
        attrs = f'label="{_escape(_label(node))}"'
        if node.status is not Status.OPEN:
            attrs += ", style=filled, fillcolor=lightgrey"
        lines.append(f"  {nid} [{attrs}];")
        for action, child in node.children.items():
            cid = ids.setdefault(id(child), f"n{len(ids)}")
            edges.append(f'  {nid} -> {cid} [label="{_escape(str(action))}"];')
            queue.append(child)
    lines.extend(edges)
    lines.append("}")
    return "\n".join(lines) + "\n"
