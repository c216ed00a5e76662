"""Why a call is kept: the weighted loss of the next tokens with and without it.

A trigram model is trained on text where a calculator result is always
followed by the same number. At the start of a document about "35 pears",
the call with its result lowers the loss of the next tokens; a call with
the wrong result raises it.

    python3 demos/gain_by_hand.py
"""

from __future__ import annotations

from apiaugment.core import ApiCall, ExecutedCall, TokenSequence
from apiaugment.filtering import WeightScheme, score_call
from apiaugment.lm import ReferenceNgramLm
from apiaugment.tokenizer import Tokenizer

TRAIN = ["[Calculator(27 + 8) -> 35]35 pears were sold"] * 10 + [
    f"{n} pears were sold" for n in range(10, 60)
]
DOC = "35 pears were sold today ."


def main() -> None:
    tok = Tokenizer.from_texts(TRAIN + [DOC])
    lm = ReferenceNgramLm(tok, order=3, alpha=0.01).train(TRAIN + [DOC])
    x = TokenSequence.encode(tok, DOC)
    print("weights:", [str(w) for w in WeightScheme().exact])
    for inp, result in (("27 + 8", "35"), ("40 + 2", "42")):
        sc = score_call(lm, "demo", x, ExecutedCall(ApiCall("Calculator", inp), result), 0)
        verdict = "keep" if sc.gain >= 1.0 else "drop"
        print(f"Calculator({inp}) -> {result}:  L+={sc.l_plus:.3f}  L-={sc.l_minus:.3f}  "
              f"gain={sc.gain:+.3f}  {verdict} at tau_f=1.0")
    far = score_call(lm, "demo", x, ExecutedCall(ApiCall("Calculator", "27 + 8"), "35"), 3)
    print(f"same call three tokens later: gain={far.gain:+.3f} (a trigram cannot see back that far)")


if __name__ == "__main__":
    main()
