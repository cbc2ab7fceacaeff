from hypothesis import given, settings
from hypothesis import strategies as st

from _worlds import BACKENDS, check_funnel_invariants, worlds
from causeway.funnel import ReasoningResponse, run_funnel


@settings(max_examples=200, deadline=None)
@given(worlds(), st.sampled_from(sorted(BACKENDS)))
def test_funnel_invariants(world, backend_name):
    graph, incident, config = world
    check_funnel_invariants(graph, incident, config, BACKENDS[backend_name])


class EchoTop:
    """Answers with the full text of the top-ranked evidence node and cites it,
    so every cause reuses the tokens of its cited snippet."""

    def propose(self, request):
        if not request.evidence:
            return ReasoningResponse("nothing", ())
        top = request.evidence[0]
        return ReasoningResponse(top.snippet, (top.node,))


@settings(max_examples=200, deadline=None)
@given(worlds())
def test_monotone_narrowing(world):
    graph, incident, config = world
    chain = run_funnel(graph, incident, EchoTop(), config)
    hops = []
    for step in chain.steps:
        if not step.cited:
            break
        top = step.cited[0]
        hops.append(dict(graph.k_hop(incident.node_id, config.evidence_hops))[top])
    assert all(a >= b for a, b in zip(hops, hops[1:]))
