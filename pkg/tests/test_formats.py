import io
import json

import pytest
from hypothesis import given

from dagtower import Dag, DagError
from dagtower.formats import dag_from_json, dag_to_json, dag_to_text, read_dags, write_dags

from test_dag import dags


def test_text_layout(class_example):
    text = dag_to_text(Dag.from_edges(3, [(1, 3), (2, 3)]))
    assert text == "n 3\ne 1 3\ne 2 3\n"


@given(dags())
def test_text_round_trip(g):
    assert read_dags(dag_to_text(g)) == [g]


@given(dags())
def test_json_round_trip(g):
    assert dag_from_json(json.loads(json.dumps(dag_to_json(g)))) == g


def test_multi_record_streams(class_example, layered_example):
    buf = io.StringIO()
    assert write_dags([class_example, layered_example], buf) == 2
    assert read_dags(buf.getvalue()) == [class_example, layered_example]
    buf = io.StringIO()
    write_dags([class_example, layered_example], buf, "json")
    assert read_dags(buf.getvalue()) == [class_example, layered_example]
    assert read_dags(json.dumps([dag_to_json(class_example)])) == [class_example]


def test_comments_and_empty_graph():
    assert read_dags("# header\nn 2\n\nn 1\n") == [Dag(2, (0, 0)), Dag(1, (0,))]


@pytest.mark.parametrize("bad", ["e 1 2\n", "n 2\nx 1\n", "n 2\ne 1 2\ne 2 1\n", '{"n": 2}'])
def test_malformed_input(bad):
    with pytest.raises(DagError):
        read_dags(bad)
