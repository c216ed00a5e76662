"""Language identification behind a small interface.

The bundled detector compares character-trigram profiles (cosine similarity,
plus the share of words that are stopwords of the language) and recognises a
few non-Latin scripts outright. It is good enough for
tests and demos; real runs should plug in a proper classifier.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class LangIdResult:
    language: str
    confidence: float


class LanguageIdentifier(Protocol):
    def detect(self, text: str) -> LangIdResult: ...


_SAMPLES = {
    "en": (
        "The committee will meet on Thursday to discuss the new proposal for the city. "
        "It was the first time that the people of the region had voted on such a question, "
        "and most of them said they would support the plan if the government paid for it. "
        "There are many reasons why this is important, but the main one is that we need more "
        "houses and better roads for the children who will live here in the future. "
        "He has published one book and several articles about the history of the country. "
        "Where was she born, and what was the name of the town where her father worked? "
        "You can search for universities, colleges and business schools on this page."
    ),
    "fr": (
        "Le comité se réunira jeudi pour discuter de la nouvelle proposition pour la ville. "
        "C'était la première fois que les habitants de la région votaient sur une telle question, "
        "et la plupart d'entre eux ont dit qu'ils soutiendraient le projet si le gouvernement le payait. "
        "La sûreté nucléaire est une priorité pour les autorités et les entreprises du secteur. "
        "Il a publié un livre et plusieurs articles sur l'histoire du pays et de ses habitants."
    ),
    "de": (
        "Der Ausschuss wird sich am Donnerstag treffen, um den neuen Vorschlag für die Stadt zu besprechen. "
        "Es war das erste Mal, dass die Menschen der Region über eine solche Frage abgestimmt haben, "
        "und die meisten von ihnen sagten, sie würden den Plan unterstützen, wenn die Regierung zahlt. "
        "Der klassische jüdische Mann ist ein Buch über die Geschichte und die Kultur des Landes. "
        "Wir brauchen mehr Häuser und bessere Straßen für die Kinder, die hier leben werden."
    ),
    "es": (
        "El comité se reunirá el jueves para discutir la nueva propuesta para la ciudad. "
        "Era la primera vez que la gente de la región votaba sobre una cuestión así, "
        "y la mayoría de ellos dijo que apoyaría el plan si el gobierno lo pagaba. "
        "Hay muchas razones por las que esto es importante, pero la principal es que necesitamos "
        "más casas y mejores carreteras para los niños que vivirán aquí en el futuro."
    ),
    "pt": (
        "O comitê vai se reunir na quinta-feira para discutir a nova proposta para a cidade. "
        "Foi a primeira vez que as pessoas da região votaram sobre uma questão assim, "
        "e a maioria delas disse que apoiaria o plano se o governo pagasse por ele. "
        "Os melhores escolas em Jersey e o homem suprimido são exemplos de textos em português. "
        "Precisamos de mais casas e melhores estradas para as crianças que vão viver aqui."
    ),
    "it": (
        "Il comitato si riunirà giovedì per discutere la nuova proposta per la città. "
        "Era la prima volta che la gente della regione votava su una questione del genere, "
        "e la maggior parte di loro ha detto che avrebbe sostenuto il piano se il governo lo pagasse. "
        "Ci sono molte ragioni per cui questo è importante, ma la principale è che abbiamo bisogno "
        "di più case e strade migliori per i bambini che vivranno qui in futuro."
    ),
    "nl": (
        "De commissie komt donderdag bijeen om het nieuwe voorstel voor de stad te bespreken. "
        "Het was de eerste keer dat de mensen uit de regio over zo'n vraag stemden, "
        "en de meesten van hen zeiden dat ze het plan zouden steunen als de regering ervoor betaalde. "
        "Er zijn veel redenen waarom dit belangrijk is, maar de belangrijkste is dat we meer "
        "huizen en betere wegen nodig hebben voor de kinderen die hier in de toekomst zullen wonen."
    ),
}

_STOPWORDS = {
    "en": "the of and to in is was for that on with as by at from it he she they this which be are "
          "were has have had not but or an a who where what when how there their his her will",
    "fr": "le la les de des du et en un une est que qui dans pour sur pas au aux ce il elle sont "
          "avec par plus ne se son sa ses",
    "de": "der die das und ist nicht ein eine zu den von mit sich des auf für im dem auch es an "
          "wird sind wie bei einer aus",
    "es": "el la los las de del y en un una es que por con para se al lo su como más pero sus le "
          "ha era muy",
    "pt": "o a os as de do da dos das e em um uma é que para com não no na por se ao mais como "
          "seu sua foi",
    "it": "il lo la i gli le di del della e è in un una che per con non si al da sono come più "
          "anche nel alla",
    "nl": "de het een en van in is dat op te zijn met voor niet aan er om ook als bij door maar "
          "naar uit hij",
}

# script prefix of the unicode character name -> language
_SCRIPTS = {"CJK": "zh", "ARABIC": "ar", "DEVANAGARI": "hi", "CYRILLIC": "ru",
            "HIRAGANA": "ja", "KATAKANA": "ja", "HANGUL": "ko", "GREEK": "el", "HEBREW": "he"}


def trigrams(text: str) -> Counter[str]:
    out: Counter[str] = Counter()
    for word in "".join(c.lower() if c.isalpha() else " " for c in text).split():
        padded = f" {word} "
        out.update(padded[i:i + 3] for i in range(len(padded) - 2))
    return out


def _cosine(a: Counter[str], b: Counter[str], b_norm: float) -> float:
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    a_norm = math.sqrt(sum(v * v for v in a.values()))
    return dot / (a_norm * b_norm) if a_norm and b_norm else 0.0


class TrigramLanguageIdentifier:
    def __init__(self, samples: dict[str, str] | None = None, sharpness: float = 25.0):
        self.profiles = {lang: trigrams(t) for lang, t in (samples or _SAMPLES).items()}
        self._norms = {l: math.sqrt(sum(v * v for v in p.values())) for l, p in self.profiles.items()}
        self.sharpness = sharpness
        self.stopwords = {l: set(w.split()) for l, w in _STOPWORDS.items() if l in self.profiles}

    def _script(self, text: str) -> LangIdResult | None:
        letters = [c for c in text if c.isalpha()]
        if not letters:
            return None
        counts: Counter[str] = Counter()
        for c in letters:
            name = unicodedata.name(c, "")
            for prefix, lang in _SCRIPTS.items():
                if name.startswith(prefix):
                    counts[lang] += 1
                    break
        if not counts:
            return None
        if counts["ja"]:  # kanji next to kana is Japanese
            counts["ja"] += counts.pop("zh", 0)
        lang, n = counts.most_common(1)[0]
        share = n / len(letters)
        return LangIdResult(lang, share) if share >= 0.5 else None

    def detect(self, text: str) -> LangIdResult:
        by_script = self._script(text)
        if by_script is not None:
            return by_script
        grams = trigrams(text)
        if not grams:
            return LangIdResult("und", 0.0)
        words = [w.lower() for w in text.split()]
        sims = {}
        for l, p in self.profiles.items():
            hits = sum(w in self.stopwords.get(l, ()) for w in words)
            sims[l] = _cosine(grams, p, self._norms[l]) + hits / max(len(words), 1)
        top = max(sims.values())
        weights = {l: math.exp(self.sharpness * (s - top)) for l, s in sims.items()}
        total = sum(weights.values())
        lang = max(sorted(sims), key=lambda l: sims[l])
        return LangIdResult(lang, weights[lang] / total)


class FixedLanguageIdentifier:
    """Always answers the same thing; handy as a stub."""

    def __init__(self, language: str, confidence: float = 1.0):
        self.result = LangIdResult(language, confidence)

    def detect(self, text: str) -> LangIdResult:
        return self.result
