"""Print the interpretation of a short trace with a premature beat and one
spurious annotation: the spurious mark is dropped, the premature beat is
explained by an extrasystole pattern."""
from abductive_ecg.ecg_kb import BEAT, RHYTHMS, EcgContext, build_model
from abductive_ecg.model import Observation
from abductive_ecg.search import InterpretationProblem, SearchStats, emit_annotations, pe_kbfs
from abductive_ecg.synth import spike_train

SPIKES = [0, 800, 1300, 2400]
ANNOTATIONS = [0, 800, 1300, 1600, 2400]


def main():
    rec = spike_train(SPIKES, 3000)
    ctx = EcgContext.build(rec, ANNOTATIONS)
    problem = InterpretationProblem([Observation(BEAT, t, t) for t in ANNOTATIONS],
                                    build_model(), ctx)
    stats = SearchStats()
    interp = pe_kbfs(problem, stats=stats)
    print(f"annotations in : {ANNOTATIONS}")
    print(f"annotations out: {emit_annotations(interp, RHYTHMS)}")
    print(f"coverage {interp.coverage}, simplicity {interp.simplicity}, "
          f"{stats.expansions} expansions")
    for obs, evidence, hyp in interp.hypotheses():
        if obs.observable in RHYTHMS:
            print(f"  {hyp.grammar.name}: {[e.tb for e in evidence]}")


if __name__ == "__main__":
    main()
