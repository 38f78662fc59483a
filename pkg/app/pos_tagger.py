# app/pos_tagger.py
"""
Coarse part-of-speech tagger built from word lists and suffix rules.

No statistical model is involved, so the same sentence always gets the
same tags. Tags follow the universal set: DET ADJ NOUN PROPN VERB AUX ADV
PRON ADP CCONJ SCONJ PART NUM PUNCT.

Rule order:
  1) punctuation-only -> PUNCT, numerals -> NUM
  2) closed-class word lists (determiners, pronouns, adpositions, ...)
  3) acronyms (ALL CAPS) and capitalized words after the first word -> PROPN
  4) open-class lists (common adjectives / verbs)
  5) -ly -> ADV; -ing / -ed / -s on a known verb stem -> VERB
  6) adjective suffixes (-al, -ous, -ive, ...) -> ADJ
  7) everything else -> NOUN
"""

import re
import unicodedata
from typing import List, Sequence

DETERMINERS = frozenset("""
a an the this that these those each every either neither some any no another
such what which whose all both half several many much few little more most
""".split())

PRONOUNS = frozenset("""
i me my mine myself you your yours yourself yourselves he him his himself she
her hers herself it its itself we us our ours ourselves they them their theirs
themselves one someone something anyone anything everyone everything nobody
nothing who whom
""".split())

ADPOSITIONS = frozenset("""
of in on at by for with from into onto upon about above across after against
along among around before behind below beneath beside besides between beyond
during except inside near off outside over past per since through throughout
toward towards under underneath until unto via within without like than
""".split())

COORDINATORS = frozenset("and or but nor yet so".split())

SUBORDINATORS = frozenset("""
if because although though while whereas unless whether when whenever where
wherever as once
""".split())

AUXILIARIES = frozenset("""
be am is are was were been being have has had having do does did can could
may might must shall should will would ought
""".split())

PARTICLES = frozenset(["to", "not", "n't"])

COMMON_ADJECTIVES = frozenset("""
quick slow big small large little long short high low new old good bad great
real true false same different important main major minor early late young
hard easy simple complex common rare open close full empty right wrong whole
recent ideal advanced several key free clear strong weak deep wide
""".split())

# base forms; inflections are recognized through the suffix rules
COMMON_VERBS = frozenset("""
be have do say go get make know think take see come want look use find give
tell work call try ask need feel become leave put mean keep let begin seem help
show hear play run move live believe bring happen write provide sit stand lose
pay meet include continue set learn change lead understand watch follow stop
create speak read allow add spend grow open walk win offer remember love
consider appear buy wait serve die send expect build stay fall cut reach kill
remain suggest raise pass sell require report decide pull jump train evaluate
perform propose adopt enhance challenge deal start sample compute design
process consider reduce remove improve achieve generate answer compress
filter retain delete prune merge score
""".split())

ADJECTIVE_SUFFIXES = ("al", "ous", "ive", "ful", "able", "ible", "ic", "less", "ish")

_NUMERAL = re.compile(r"^[+-]?[\d][\d.,:/%-]*$")


def _is_punct(word: str) -> bool:
    return bool(word) and all(unicodedata.category(ch).startswith("P") for ch in word)


def _verb_stem_known(lower: str) -> bool:
    candidates = []
    if lower.endswith("ing") and len(lower) > 4:
        base = lower[:-3]
        candidates += [base, base + "e"]
        if len(base) > 2 and base[-1] == base[-2]:
            candidates.append(base[:-1])
    if lower.endswith("ed") and len(lower) > 3:
        base = lower[:-2]
        candidates += [base, lower[:-1]]
        if len(base) > 2 and base[-1] == base[-2]:
            candidates.append(base[:-1])
        if base.endswith("i"):
            candidates.append(base[:-1] + "y")
    if lower.endswith("es") and len(lower) > 3:
        candidates.append(lower[:-2])
    if lower.endswith("s") and not lower.endswith("ss") and len(lower) > 2:
        candidates.append(lower[:-1])
    return any(c in COMMON_VERBS for c in candidates)


def tag_word(word: str, position: int = 0) -> str:
    """Tag one word given its index within the sentence."""
    if _is_punct(word):
        return "PUNCT"
    if _NUMERAL.match(word):
        return "NUM"

    lower = word.lower()
    if lower in DETERMINERS:
        return "DET"
    if lower in PRONOUNS:
        return "PRON"
    if lower in ADPOSITIONS:
        return "ADP"
    if lower in COORDINATORS:
        return "CCONJ"
    if lower in SUBORDINATORS:
        return "SCONJ"
    if lower in AUXILIARIES:
        return "AUX"
    if lower in PARTICLES:
        return "PART"

    letters = [ch for ch in word if ch.isalpha()]
    if len(letters) > 1 and all(ch.isupper() for ch in letters):
        return "PROPN"
    if position > 0 and word[0].isupper():
        return "PROPN"

    if lower in COMMON_ADJECTIVES:
        return "ADJ"
    if lower in COMMON_VERBS:
        return "VERB"
    if lower.endswith("ly") and len(lower) > 4:
        return "ADV"
    if _verb_stem_known(lower):
        return "VERB"
    if len(lower) > 4 and lower.endswith(ADJECTIVE_SUFFIXES):
        return "ADJ"
    return "NOUN"


def tag_sentence(words: Sequence[str]) -> List[str]:
    """Positions count words only, so a capital after an opening quote or bracket is still sentence-initial."""
    tags: List[str] = []
    position = 0
    for w in words:
        tag = tag_word(w, position)
        if tag != "PUNCT":
            position += 1
        tags.append(tag)
    return tags
