#!/usr/bin/env python3
"""Generates the synthetic half of the POS tagger training corpus.

Sentences come from a small seeded grammar over hand-curated lexicons, so the
output is reproducible: `python3 tools/gen_tagger_corpus.py > crates/core/resources/tagger/synthetic.txt`.
"""
import random

NOUNS = """task sentence word example instance definition answer question output input
model dataset author crowdworker instruction explanation premise hypothesis summary article
paragraph passage review story topic label category domain source language translation
dog cat fox bird horse cow fish man woman child boy girl teacher student doctor player
city house street park river mountain car bus train bicycle boat book letter phone computer
table chair window door garden field forest beach road bridge school office market shop
apple bread water coffee music movie song picture game ball team friend family group
result score metric value number list pattern feature bias token phrase verb noun adjective
problem solution reason idea plan claim fact argument evidence decision method system tool
country government company price market weather morning evening night day week year
scientist writer artist worker driver singer dancer farmer officer soldier king queen""".split()

IRREG_PLURAL = {"man": "men", "woman": "women", "child": "children", "fish": "fish",
                "person": "people", "hypothesis": "hypotheses", "category": "categories",
                "city": "cities", "country": "countries", "family": "families",
                "company": "companies", "story": "stories", "summary": "summaries"}

VERBS = """translate generate answer classify read write identify determine compare select
find replace rewrite label extract count sort return add combine describe explain show
create modify remove change use evaluate measure compute predict learn test train open close
walk run jump play eat drink cook clean paint watch visit help call carry push pull move
build break drive ride climb swim fly sing dance listen talk speak ask tell give take make
see look hear feel think know want need like love hate start finish stop wait stay leave
arrive follow lead win lose buy sell pay send receive hold keep bring choose contain include""".split()

IRREG = {  # base: (past, participle)
    "write": ("wrote", "written"), "find": ("found", "found"), "show": ("showed", "shown"),
    "run": ("ran", "run"), "eat": ("ate", "eaten"), "drink": ("drank", "drunk"),
    "build": ("built", "built"), "break": ("broke", "broken"), "drive": ("drove", "driven"),
    "ride": ("rode", "ridden"), "swim": ("swam", "swum"), "fly": ("flew", "flown"),
    "sing": ("sang", "sung"), "speak": ("spoke", "spoken"), "tell": ("told", "told"),
    "give": ("gave", "given"), "take": ("took", "taken"), "make": ("made", "made"),
    "see": ("saw", "seen"), "hear": ("heard", "heard"), "feel": ("felt", "felt"),
    "think": ("thought", "thought"), "know": ("knew", "known"), "leave": ("left", "left"),
    "lead": ("led", "led"), "win": ("won", "won"), "lose": ("lost", "lost"),
    "buy": ("bought", "bought"), "sell": ("sold", "sold"), "pay": ("paid", "paid"),
    "send": ("sent", "sent"), "hold": ("held", "held"), "keep": ("kept", "kept"),
    "bring": ("brought", "brought"), "choose": ("chose", "chosen"), "read": ("read", "read"),
    "learn": ("learned", "learned"), "teach": ("taught", "taught"),
}

ADJS = """new old short long big small large good bad correct incorrect wrong right true false
simple complex easy difficult hard clear similar different same original final main single
positive negative neutral happy sad angry quick slow fast bright dark red blue green white
black young tall beautiful ugly important relevant specific general common rare diverse biased
fluent accurate useful careful quiet loud cold hot warm empty full rich poor strong weak
natural formal informal grammatical ambiguous obvious plausible valid invalid possible likely
recent modern ancient local global public private personal social political economic""".split()

ADVS = """quickly slowly carefully clearly easily often never always usually sometimes rarely
very really quite too extremely nearly almost only also already still again together
here there now then today soon later finally suddenly happily sadly loudly quietly well
badly correctly exactly simply directly briefly fully mostly barely rather""".split()
DEGREE = ["very", "quite", "really", "extremely", "rather", "too"]

DETS = ["the", "a", "an", "this", "that", "each", "every", "some", "any", "no", "the", "the", "a"]
PL_DETS = ["the", "these", "those", "some", "many", "all", "several", "few", "the"]
PRONS_SUBJ = ["i", "you", "he", "she", "it", "we", "they"]
PRONS_OBJ = ["me", "you", "him", "her", "it", "us", "them"]
POSS = ["my", "your", "his", "her", "its", "our", "their"]
ADPS = ["in", "on", "at", "with", "from", "for", "of", "by", "into", "under", "over", "near",
        "after", "before", "about", "between", "through", "without", "across", "during"]
CONJS = ["and", "or", "but"]
NUMS = ["one", "two", "three", "four", "five", "ten", "twenty", "hundred", "1", "2", "3", "10", "42", "2022"]
MODALS = ["can", "could", "should", "must", "will", "would", "may", "might"]


def plural(n):
    if n in IRREG_PLURAL:
        return IRREG_PLURAL[n]
    if n.endswith(("s", "x", "ch", "sh")):
        return n + "es"
    if n.endswith("y") and n[-2] not in "aeiou":
        return n[:-1] + "ies"
    return n + "s"


def third(v):
    if v.endswith(("s", "x", "ch", "sh", "o")):
        return v + "es"
    if v.endswith("y") and v[-2] not in "aeiou":
        return v[:-1] + "ies"
    return v + "s"


def doubles(v):
    return (len(v) >= 3 and v[-1] not in "aeiouwxy" and v[-2] in "aeiou"
            and v[-3] not in "aeiou" and v in {"run", "swim", "stop", "win", "jump"} - {"jump"})


def past(v):
    if v in IRREG:
        return IRREG[v][0]
    if v.endswith("e"):
        return v + "d"
    if v.endswith("y") and v[-2] not in "aeiou":
        return v[:-1] + "ied"
    if doubles(v):
        return v + v[-1] + "ed"
    return v + "ed"


def participle(v):
    return IRREG[v][1] if v in IRREG else past(v)


def ing(v):
    if v.endswith("ie"):
        return v[:-2] + "ying"
    if v.endswith("e") and not v.endswith("ee"):
        return v[:-1] + "ing"
    if doubles(v):
        return v + v[-1] + "ing"
    return v + "ing"


class Gen:
    def __init__(self, seed):
        self.r = random.Random(seed)

    def c(self, xs):
        return self.r.choice(xs)

    def maybe(self, p):
        return self.r.random() < p

    def adjp(self):
        out = []
        if self.maybe(0.15):
            out.append((self.c(DEGREE), "ADV"))
        out.append((self.c(ADJS), "ADJ"))
        return out

    def np(self, plural_ok=True, subj=False):
        r = self.r.random()
        if r < 0.15:
            return [(self.c(PRONS_SUBJ if subj else PRONS_OBJ), "PRON")], False
        pl = plural_ok and self.maybe(0.35)
        out = []
        if pl:
            if self.maybe(0.8):
                out.append((self.c(PL_DETS), "DET"))
            elif self.maybe(0.5):
                out.append((self.c(NUMS[1:]), "NUM"))
        else:
            if self.maybe(0.2):
                out.append((self.c(POSS), "PRON"))
            else:
                out.append((self.c(DETS), "DET"))
        while self.maybe(0.4 if len(out) < 3 else 0.1):
            out.extend(self.adjp())
        if self.maybe(0.12):
            out.append((self.c(NOUNS), "NOUN"))
        n = self.c(NOUNS)
        out.append((plural(n) if pl else n, "NOUN"))
        if self.maybe(0.2):
            out.append((self.c(ADPS), "ADP"))
            sub, _ = self.np(subj=False)
            out.extend(sub)
        return out, pl

    def vp(self, subj_plural, subj_pron=None):
        v = self.c(VERBS)
        r = self.r.random()
        out = []
        if r < 0.3:
            form = v if (subj_plural or subj_pron in ("i", "you", "we", "they")) else third(v)
            out.append((form, "VERB"))
        elif r < 0.55:
            out.append((past(v), "VERB"))
        elif r < 0.7:
            out.append((self.c(MODALS), "VERB"))
            if self.maybe(0.2):
                out.append(("not", "ADV"))
            out.append((v, "VERB"))
        elif r < 0.85:
            be = "are" if subj_plural else ("am" if subj_pron == "i" else "is")
            if self.maybe(0.3):
                be = "were" if subj_plural else "was"
            out.append((be, "VERB"))
            out.append((ing(v), "VERB"))
        else:
            aux = "have" if (subj_plural or subj_pron in ("i", "you", "we", "they")) else "has"
            out.append((aux, "VERB"))
            out.append((participle(v), "VERB"))
        if self.maybe(0.7):
            obj, _ = self.np()
            out.extend(obj)
        if self.maybe(0.3):
            out.append((self.c(ADVS), "ADV"))
        return out

    def sentence(self):
        r = self.r.random()
        if r < 0.2:
            # imperative
            out = []
            if self.maybe(0.15):
                out += [("do", "VERB"), ("not", "ADV")]
            out.append((self.c(VERBS), "VERB"))
            obj, _ = self.np()
            out.extend(obj)
            if self.maybe(0.4):
                out.append((self.c(ADPS), "ADP"))
                o2, _ = self.np()
                out.extend(o2)
            return out
        if r < 0.35:
            # copula + adjective
            subj, pl = self.np(subj=True)
            pron = subj[0][0] if subj[0][1] == "PRON" and len(subj) == 1 else None
            be = "are" if pl or pron in ("you", "we", "they") else ("am" if pron == "i" else "is")
            if self.maybe(0.3):
                be = "were" if pl or pron in ("you", "we", "they") else "was"
            return subj + [(be, "VERB")] + self.adjp()
        if r < 0.45:
            # to-infinitive
            subj, pl = self.np(subj=True)
            pron = subj[0][0] if subj[0][1] == "PRON" and len(subj) == 1 else None
            v = self.c(["want", "need", "like", "try", "decide", "plan"])
            form = past(v) if self.maybe(0.5) else (v if pl or pron in ("i", "you", "we", "they") else third(v))
            obj, _ = self.np()
            return subj + [(form, "VERB"), ("to", "PRT"), (self.c(VERBS), "VERB")] + obj
        subj, pl = self.np(subj=True)
        pron = subj[0][0] if subj[0][1] == "PRON" and len(subj) == 1 else None
        out = list(subj)
        if self.maybe(0.12):
            out.append((self.c(["often", "never", "always", "usually", "quickly", "carefully", "rarely"]), "ADV"))
        out += self.vp(pl, pron)
        if self.maybe(0.15):
            out.append((self.c(CONJS), "CONJ"))
            s2, pl2 = self.np(subj=True)
            p2 = s2[0][0] if s2[0][1] == "PRON" and len(s2) == 1 else None
            out += s2 + self.vp(pl2, p2)
        return out


def main():
    g = Gen(20220615)
    for _ in range(4000):
        s = g.sentence()
        for i in range(len(s) - 1):
            if s[i][0] in ("a", "an") and s[i][1] == "DET":
                s[i] = ("an" if s[i + 1][0][0] in "aeiou" else "a", "DET")
        print(" ".join(f"{w}/{t}" for w, t in s))


if __name__ == "__main__":
    main()
