"""Hypothesis strategies for texts with valid span sets."""

from hypothesis import strategies as st

from picosum.spans import PICO_CLASSES, PicoSpan

TEXT_ALPHABET = "abcdefgh XYZ.,;-\n"


@st.composite
def text_with_spans(draw, max_size=60, normalized=True):
    text = draw(st.text(alphabet=TEXT_ALPHABET, min_size=1, max_size=max_size))
    cuts = sorted(draw(st.sets(st.integers(0, len(text)), max_size=12)))
    spans = []
    # consecutive cut points give disjoint candidates; keep every other pair with a gap
    for i in range(0, len(cuts) - 1, 2):
        start, end = cuts[i], cuts[i + 1]
        if start < end and (not spans or start > spans[-1].end):
            spans.append(PicoSpan(start, end, draw(st.sampled_from(PICO_CLASSES))))
    return text, spans


@st.composite
def raw_spans(draw, length=40):
    items = draw(
        st.lists(
            st.tuples(st.integers(0, length - 1), st.integers(1, 10), st.sampled_from(PICO_CLASSES)),
            max_size=10,
        )
    )
    return [PicoSpan(s, min(s + w, length), k) for s, w, k in items]
