"""Reading and writing DAG records.

Text records are a header line ``n <count>`` followed by one ``e <u> <v>`` line
per edge. JSON records are ``{"n": int, "edges": [[u, v], ...]}``; a file may hold
one object, a list of them, or one object per line.
"""
from __future__ import annotations

import json
from typing import Iterable, Iterator, TextIO

from .dag import Dag, DagError


def dag_to_text(g: Dag) -> str:
    lines = [f"n {g.n}"]
    lines.extend(f"e {u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def dag_to_json(g: Dag) -> dict:
    return {"n": g.n, "edges": [[u, v] for u, v in g.edges]}


def dag_from_json(obj: dict) -> Dag:
    try:
        return Dag.from_edges(int(obj["n"]), [(int(u), int(v)) for u, v in obj["edges"]])
    except (KeyError, TypeError) as exc:
        raise DagError(f"malformed JSON DAG record: {obj!r}") from exc


def parse_text(text: str) -> Iterator[Dag]:
    n = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "n" and len(parts) == 2:
            if n is not None:
                yield Dag.from_edges(n, edges)
            n, edges = int(parts[1]), []
        elif parts[0] == "e" and len(parts) == 3:
            if n is None:
                raise DagError(f"line {lineno}: edge before 'n' header")
            edges.append((int(parts[1]), int(parts[2])))
        else:
            raise DagError(f"line {lineno}: cannot parse {raw!r}")
    if n is not None:
        yield Dag.from_edges(n, edges)


def parse_json(text: str) -> Iterator[Dag]:
    text = text.strip()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        for line in text.splitlines():
            if line.strip():
                yield dag_from_json(json.loads(line))
        return
    if isinstance(data, list):
        for obj in data:
            yield dag_from_json(obj)
    else:
        yield dag_from_json(data)


def read_dags(text: str) -> list[Dag]:
    """Parse records in either format; JSON is detected by a leading brace or bracket."""
    stripped = text.lstrip()
    if stripped[:1] in ("{", "["):
        return list(parse_json(stripped))
    return list(parse_text(text))


def write_dags(dags: Iterable[Dag], stream: TextIO, fmt: str = "text") -> int:
    count = 0
    for g in dags:
        if fmt == "json":
            stream.write(json.dumps(dag_to_json(g)) + "\n")
        else:
            stream.write(dag_to_text(g))
        count += 1
    return count
