from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from abductive_ecg.ecg_kb import BEAT, OBSERVABLES, QRS, RHYTHMS, EcgContext, build_model
from abductive_ecg.model import AbstractionModel, Observable, Observation
from abductive_ecg.search import (InterpretationProblem, SearchStats, abduce, deduce,
                                  emit_annotations, pe_kbfs, subsume, verify)
from abductive_ecg.synth import spike_train, synthetic_ecg

MODEL = build_model()


def beat_problem(anns, beats, duration, budget=10_000, spikes=False):
    rec = spike_train(beats, duration) if spikes else synthetic_ecg(beats, duration)
    ctx = EcgContext.build(rec, anns)
    return InterpretationProblem([Observation(BEAT, t, t) for t in anns], MODEL, ctx, budget=budget)


def qrs_problem(times):
    return InterpretationProblem([Observation(QRS, t, t) for t in times], MODEL, None)


def hyp_of(node, grammar_name):
    return next(hid for hid, h in node.hyps.items() if h.grammar.name == grammar_name)


def rhythm_evidence(interp):
    return {h.grammar.name: [e.tb for e in ev] for o, ev, h in interp.hypotheses()
            if o.observable in RHYTHMS}


@pytest.fixture(scope="module")
def extrasystole():
    pb = beat_problem([0, 800, 1300, 1600, 2400], [0, 800, 1300, 2400], 3000, spikes=True)
    return pb, pe_kbfs(pb)


class TestValuation:
    def test_root(self):
        root = qrs_problem([0, 800]).root()
        assert root.valuation() == (1, 1)
        assert root.coverage == 0 and root.simplicity == 1

    def test_empty_problem(self):
        pb = qrs_problem([])
        result = pe_kbfs(pb)
        assert result.coverage == 1 and result.simplicity == 1
        assert emit_annotations(result) == []

    def test_extrasystole_counts(self, extrasystole):
        _, interp = extrasystole
        assert interp.coverage == Fraction(8, 9)
        assert interp.simplicity == Fraction(1, 6)

    def test_one_hypothesis(self):
        node = abduce(qrs_problem([0, 800, 1600]).root(), 0)[0]
        assert node.simplicity == Fraction(1, 2)

    def test_default_k(self):
        assert MODEL.default_k() == 4


class TestAbduce:
    def test_beat_goes_to_p1(self):
        pb = beat_problem([0, 800, 1600], [0, 800, 1600], 2000)
        kids = abduce(pb.root(), 0)
        names = [[h.grammar.name for h in k.hyps.values()] for k in kids]
        assert ["P1"] in names
        assert all(n in (["P1"], []) for n in names)

    def test_qrs_goes_to_four_patterns(self):
        kids = abduce(qrs_problem([0, 800, 1600]).root(), 0)
        names = sorted(h.grammar.name for k in kids for h in k.hyps.values())
        assert names == ["P2-Bradycardia", "P2-NormalRhythm", "P2-Tachycardia", "P5"]

    def test_unknown_observable(self):
        noise = Observable("Noise", instantaneous=True)
        model = AbstractionModel({**OBSERVABLES, "Noise": noise}, list(MODEL.grammars))
        pb = InterpretationProblem([Observation("Noise", 5, 5)], model)
        assert abduce(pb.root(), 0) == []

    def test_first_focus_is_earliest(self):
        pb = qrs_problem([1600, 0, 800])
        root = pb.root()
        assert root.focus == ("observation", 0)
        assert root.observation(0).tb == 0


class TestSubsume:
    def _p5_after(self, times):
        pb = qrs_problem([0, 800, 1300, 1600])
        node = next(k for k in abduce(pb.root(), 0)
                    if any(h.grammar.name == "P5" for h in k.hyps.values()))
        hid = hyp_of(node, "P5")
        for slot, t in enumerate(times, start=1):
            node = next(k for k in subsume(node, hid)
                        if k.observation(k.hyps[hid].evidence[slot]).tb == t)
        return node, hid

    def test_nearest_first(self):
        node, hid = self._p5_after([])
        kids = subsume(node, hid)
        firsts = [k.observation(k.hyps[hid].evidence[1]).tb for k in kids]
        assert firsts[0] == 800
        assert sorted(set(firsts)) == [800, 1300, 1600]

    def test_premature_slot(self):
        node, hid = self._p5_after([800])
        kids = subsume(node, hid)
        matched = {k.observation(k.hyps[hid].evidence[2]).tb for k in kids}
        assert matched == {1300}

    def test_coverage_never_drops(self):
        node, hid = self._p5_after([800])
        for k in subsume(node, hid):
            assert k.coverage >= node.coverage

    def test_no_candidates(self):
        node, hid = self._p5_after([800, 1300])
        # the pause slot needs a QRS in [2160, 2640]; none exists
        assert subsume(node, hid) == []


class TestDeduce:
    def test_missing_beat_recovered(self):
        beats = [400 + 800 * i for i in range(10)]
        anns = beats[:5] + beats[6:]
        interp = pe_kbfs(beat_problem(anns, beats, 8600))
        out = emit_annotations(interp)
        assert any(abs(t - beats[5]) <= 150 for t in out)
        deduced = [o for o, ev, h in interp.hypotheses() if h.grammar.name == "P0"]
        assert len(deduced) == 1 and abs(deduced[0].tb - beats[5]) <= 150
        assert verify(interp)

    def test_flat_signal_dead_end(self):
        beats = [400 + 800 * i for i in range(10)]
        anns = beats[:5] + beats[6:]
        interp = pe_kbfs(beat_problem(anns, anns, 8600))
        out = emit_annotations(interp)
        assert not any(abs(t - beats[5]) <= 150 for t in out)
        assert not any(h.grammar.name == "P0" for _, _, h in interp.hypotheses())

    def test_no_producer(self):
        pb = qrs_problem([0, 800, 1600])
        node = abduce(pb.root(), 0)[0]
        hid = next(iter(node.hyps))
        h = node.hyps[hid]
        # a QRS finding is produced by P1 only
        kids = deduce(node, hid)
        assert {k.hyps[max(k.hyps)].grammar.name for k in kids} <= {"P1"}
        assert h.pattern.findings[-1].observable == QRS

    def test_subsume_before_deduce(self):
        pb = qrs_problem([0, 800, 1600])
        node = next(k for k in abduce(pb.root(), 0)
                    if any(h.grammar.name == "P2-NormalRhythm" for h in k.hyps.values()))
        hid = hyp_of(node, "P2-NormalRhythm")
        assert subsume(node, hid) and deduce(node, hid)
        vias = [k.via for k in node.successors()]
        assert vias[0] == "subsume"
        assert vias.index("deduce") > vias.index("subsume")


class TestSearch:
    def test_clean_normal_rhythm(self):
        beats = [0, 800, 1600, 2400]
        interp = pe_kbfs(beat_problem(beats, beats, 3000))
        assert interp.coverage == 1
        assert rhythm_evidence(interp) == {"P2-NormalRhythm": beats}
        assert emit_annotations(interp) == beats

    def test_extrasystole(self, extrasystole):
        _, interp = extrasystole
        assert emit_annotations(interp) == [0, 800, 1300, 2400]
        assert rhythm_evidence(interp) == {"P5": [0, 800, 1300, 2400]}
        assert verify(interp)

    def test_unexplained_qrs_not_emitted(self):
        pb = beat_problem([1000], [1000], 2000)
        interp = pe_kbfs(pb)
        assert any(o.observable == QRS for o, _, _ in interp.hypotheses())
        assert emit_annotations(interp) == []

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            stats = SearchStats()
            pb = beat_problem([0, 800, 1300, 1600, 2400], [0, 800, 1300, 2400], 3000, spikes=True)
            interp = pe_kbfs(pb, stats=stats)
            runs.append((emit_annotations(interp), stats.expansions, stats.closed))
        assert runs[0] == runs[1]

    def test_budget_truncates_open(self):
        stats = SearchStats()
        pb = beat_problem([0, 800, 1300, 1600, 2400], [0, 800, 1300, 2400], 3000,
                          budget=50, spikes=True)
        interp = pe_kbfs(pb, stats=stats)
        assert stats.truncated
        assert verify(interp)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            pe_kbfs(qrs_problem([0]), k=0)

    def test_evidence_disjoint_in_every_node(self):
        pb = beat_problem([0, 800, 1300, 1600, 2400], [0, 800, 1300, 2400], 3000, spikes=True)

        def watch(node, child):
            if child is None:
                return
            owners = {}
            for hid, h in child.hyps.items():
                for oid in h.evidence:
                    if oid is not None:
                        assert oid not in owners
                        owners[oid] = hid
            assert owners == child.owner
            if child.via == "subsume":
                assert child.coverage >= node.coverage

        pe_kbfs(pb, observer=watch)


@settings(max_examples=12, deadline=None)
@given(st.integers(600, 1100), st.lists(st.integers(-30, 30), min_size=4, max_size=7),
       st.integers(0, 10))
def test_random_trains_verified(rr, jitter, drop):
    beats = [300]
    for j in jitter:
        beats.append(beats[-1] + rr + j)
    anns = [b for i, b in enumerate(beats) if i != drop]
    duration = beats[-1] + 600
    pb = beat_problem(anns, beats, duration, budget=2000)
    interp = pe_kbfs(pb)
    assert verify(interp)
    out = emit_annotations(interp)
    assert all(0 <= t < duration for t in out)
    assert all(any(abs(t - b) <= 150 for b in beats) for t in out)


def test_verify_detects_tampering(extrasystole):
    pb, interp = extrasystole
    node = interp.clone("tamper")
    hid = next(h for h, v in node.hyps.items() if v.grammar.name == "P5")
    h = node.hyps[hid]
    # swap in the spurious annotation's QRS for the premature one
    fake = node._new_observation(QRS)
    node.conj[fake] = (QRS, Observation(QRS, 1600, 1600))
    node.hyps[hid] = replace(h, evidence=h.evidence[:2] + (fake,) + h.evidence[3:])
    assert not verify(node)
