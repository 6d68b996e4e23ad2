"""
sketcher のテスト
"""
import pytest

from errors import AbstractTypeError, CyclicClusterError
from fspec import Cluster, Edge, parse_fspec
from sketcher import HoleRef, Temp, generate_sketch, generate_sketches, render_sketch


def test_jaas_sketches(jaas_branch, jaas_fspec):
    init, log, subject = generate_sketches(jaas_branch, jaas_fspec)

    assert render_sketch(init, jaas_fspec) == [
        "sketch 1 #Initialization",
        "    t1 = new com.sun.security.auth.callback.TextCallbackHandler()",
        "    t2 = new javax.security.auth.login.LoginContext(?1:java.lang.String, t1)",
    ]
    assert [(h.hole_id, h.type_name, h.role) for h in init.holes] == [(1, "java.lang.String", "argument")]

    assert render_sketch(log, jaas_fspec) == [
        "sketch 2 #Logging_In",
        "    ?2:javax.security.auth.login.LoginContext.login()",
    ]
    assert log.holes[0].site == (0, 0)

    assert render_sketch(subject, jaas_fspec) == [
        "sketch 3 #Subject_Inspection",
        "    t1 = ?3:javax.security.auth.login.LoginContext.getSubject()",
        "    t2 = t1.getPrincipals()",
    ]


def test_hole_ids_unique_across_task(jaas_branch, jaas_fspec):
    ids = [h.hole_id for s in generate_sketches(jaas_branch, jaas_fspec) for h in s.holes]
    assert ids == sorted(set(ids))


def test_sketch_lookups(jaas_branch, jaas_fspec):
    init = generate_sketch(jaas_branch.cluster(1), jaas_fspec)
    assert init.temp_of(2) == Temp("t2")
    assert init.temps == (Temp("t1"), Temp("t2"))
    assert init.hole_at(2, 1).hole_id == 1
    assert init.hole_at(2, 2) is None
    assert init.statements[1].args == (HoleRef(1), Temp("t1"))


FULLY_FED = """\
fspec fed
node 1 kind=static class=p.Src method=make params=- return=p.Thing annotation=#Make
node 2 kind=instance class=p.Thing method=use params=- return=void annotation=#Make
edge 1 2 kind=data freq=1
start 1
end 2
"""


def test_internally_fed_cluster_has_no_holes():
    fspec = parse_fspec(FULLY_FED)
    cluster = Cluster(1, "#Make", (1, 2), fspec.edges, ())
    sketch = generate_sketch(cluster, fspec)
    assert sketch.holes == ()
    assert render_sketch(sketch, fspec)[1:] == ["    t1 = p.Src.make()", "    t1.use()"]


def test_cyclic_cluster():
    fspec = parse_fspec(FULLY_FED)
    edges = fspec.edges + (Edge(2, 1, "control"),)
    with pytest.raises(CyclicClusterError):
        generate_sketch(Cluster(1, "#Make", (1, 2), edges, ()), fspec)


def test_interface_without_alias():
    fspec = parse_fspec(
        "fspec abstract\ninterface p.Shape\n"
        "node 1 kind=constructor class=p.Shape method=<init> params=- annotation=#New\n"
        "start 1\nend 1\n")
    with pytest.raises(AbstractTypeError):
        generate_sketch(Cluster(1, "#New", (1,), (), ()), fspec)
