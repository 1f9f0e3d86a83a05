#!/usr/bin/env python3
"""Regenerate the bundled scenario corpora under data/fixtures/.

Two registers are produced from seeded phrase grammars:

  encyclopedic  short reference-style entries about places, people, species
  debate        short parliamentary-debate style interventions

Both share a pool of common function words, numbers and place names so that
models trained on either corpus have overlapping vocabularies. Each corpus is
written as three line-oriented files: two disjoint training halves (_a, _b)
and a held-out evaluation split (_eval). The text is generated, not copied,
and is dedicated to the public domain (CC0-1.0).

Usage: python3 tools/make_fixtures.py [OUT_DIR]
"""

import os
import random
import sys

SEED = 20240611
DOCS_PER_CORPUS = 5200
TRAIN_DOCS = 2200  # per half
# remaining docs go to the eval split

PLACES = """Aldmoor Brenwick Carrow Dunmere Eastholm Fallowby Garnet Harwell Iverton
Jessop Kilbride Larchfield Millbrook Northam Oakridge Pellham Quarry Redvale
Stanmore Thornbury Upwood Vantage Westcombe Yarrow Ashdown Belmont Coldharbour
Dovecote Elmstead Foxley Glenrock Hollins Ingleby Kestrel Lowther Marsden""".split()

REGIONS = """the northern province,the eastern district,the coastal region,the highland
county,the river valley,the southern lowlands,the western plateau,the central
basin,the lake district,the border country""".replace("\n", " ").split(",")

FIRST = """Anna Bernard Clara Daniel Edith Frederick Grace Henry Irene James Katherine
Leonard Margaret Nicholas Olive Peter Rose Samuel Teresa Victor Walter Agnes
Arthur Beatrice Charles Dorothy Edmund Florence George Harriet""".split()

LAST = """Abbott Barlow Carver Dalton Ellison Fairfax Gilmore Hartley Ingram Jennings
Kendall Lambert Mercer Norwood Osborne Prescott Radcliffe Sheldon Thorne Underhill
Vaughan Whitaker Ashby Brooke Chandler Drummond Everett Fletcher""".split()

YEARS = [str(y) for y in range(1780, 2001)]
NUMS = ["two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
        "twelve", "fifteen", "twenty", "thirty", "forty", "fifty", "several",
        "many", "a few", "some", "hundreds of", "thousands of"]


def pick(rng, items):
    return rng.choice(items)


def maybe(rng, p, text):
    return text if rng.random() < p else ""


def person(rng):
    return f"{pick(rng, FIRST)} {pick(rng, LAST)}"


def place(rng):
    return pick(rng, PLACES)


def region(rng):
    return pick(rng, REGIONS).strip()


# --------------------------------------------------------------------------
# encyclopedic register

E_PROFESSIONS = """painter composer botanist engineer architect historian poet
astronomer geologist physician novelist mathematician surveyor naturalist
cartographer chemist sculptor linguist explorer philosopher""".split()
E_NATIONALITY = """English Scottish Welsh Irish French Dutch Danish Norwegian
Swedish German Italian Spanish Portuguese Austrian Swiss""".split()
E_WORKS = """studies of coastal erosion|a series of landscape paintings|early
work on the classification of ferns|the design of several railway bridges|a
history of the medieval wool trade|a catalogue of variable stars|collections of
folk songs|a survey of the northern coast|research on mineral springs|a
grammar of the local dialect|a treatise on the motion of glaciers|the
restoration of the old cathedral""".replace("\n", " ").split("|")
E_FEATURES = """river lake hill town village valley forest island castle abbey
bridge harbour moor canal estuary""".split()
E_SPECIES = """beetle moth fern orchid sparrow finch lichen moss heron thrush
trout vole shrew willow sedge""".split()
E_ADJ = """small large narrow shallow ancient wooded rocky fertile remote
sheltered marshy steep quiet prosperous historic""".split()
E_HABITAT = """damp woodland|chalk grassland|upland bogs|slow rivers|coastal
cliffs|hedgerows and field margins|shaded stream banks|heathland|peat marshes|
old stone walls""".replace("\n", " ").split("|")
E_ECON = """agriculture fishing quarrying weaving brewing shipbuilding tourism
milling mining trade""".split()
E_VERBS = """is located in|lies in|is situated in|is found in""".split("|")


def encyclopedic_sentence(rng):
    k = rng.randrange(9)
    p = place(rng)
    if k == 0:
        return (f"{p} is a {pick(rng, E_ADJ)} {pick(rng, E_FEATURES)} that "
                f"{pick(rng, E_VERBS)} {region(rng)}.")
    if k == 1:
        y = int(pick(rng, YEARS[:-60]))
        return (f"{person(rng)} ({y}–{y + rng.randrange(30, 80)}) was a "
                f"{pick(rng, E_NATIONALITY)} {pick(rng, E_PROFESSIONS)} known for "
                f"{pick(rng, E_WORKS).strip()}.")
    if k == 2:
        return (f"The {pick(rng, E_SPECIES)} is a {pick(rng, E_ADJ)} species "
                f"found in {pick(rng, E_HABITAT).strip()} across {region(rng)}.")
    if k == 3:
        return (f"The town of {p} has a population of about "
                f"{rng.randrange(1, 90) * 100} and its economy is based on "
                f"{pick(rng, E_ECON)} and {pick(rng, E_ECON)}.")
    if k == 4:
        return (f"The {pick(rng, E_FEATURES)} was first recorded in "
                f"{pick(rng, YEARS)}, when it was described by "
                f"{person(rng)}{maybe(rng, 0.5, ' in a report to the society')}.")
    if k == 5:
        return (f"It is named after {person(rng)}, a "
                f"{pick(rng, E_PROFESSIONS)} who lived in {place(rng)} during the "
                f"{pick(rng, ['early', 'middle', 'late'])} "
                f"{pick(rng, ['eighteenth', 'nineteenth', 'twentieth'])} century.")
    if k == 6:
        return (f"The {pick(rng, E_FEATURES)} is about {rng.randrange(2, 120)} "
                f"kilometres long and {pick(rng, ['flows', 'runs', 'extends'])} "
                f"from {place(rng)} to {place(rng)}.")
    if k == 7:
        return (f"In {pick(rng, YEARS)} the {pick(rng, E_FEATURES)} was "
                f"{pick(rng, ['rebuilt', 'enlarged', 'restored', 'damaged by fire', 'sold'])}"
                f" and {pick(rng, ['later', 'afterwards', 'soon'])} became part of "
                f"{region(rng)}.")
    return (f"The {pick(rng, E_SPECIES)} feeds mainly on "
            f"{pick(rng, ['seeds', 'insects', 'small fish', 'leaves', 'snails', 'berries'])}"
            f" and breeds in {pick(rng, ['spring', 'early summer', 'late summer', 'autumn'])}.")


# --------------------------------------------------------------------------
# debate register

D_OPEN = """Mr. Speaker,|Madam Deputy Speaker,|Mr. Speaker, I am grateful for the
opportunity to speak, and|Madam Speaker,|I thank the honourable member, and|With
respect,|Mr. Speaker, let me be clear:""".replace("\n", " ").split("|")
D_BILLS = """the housing bill|the transport bill|the schools funding bill|the
fisheries bill|the rural broadband bill|the water quality bill|the pensions
bill|the local government bill|the health services bill|the agriculture
bill""".replace("\n", " ").split("|")
D_ISSUES = """waiting lists|rising rents|the closure of rural schools|flooding
in low lying areas|the cost of energy|bus services|the pay of nurses|road
repairs|child poverty|the future of the harbour|youth unemployment|care for
the elderly""".replace("\n", " ").split("|")
D_ACTIONS = """review the funding formula|publish the report before the
recess|meet the council next week|bring forward an amendment|consult the
unions|set out the timetable|write to the honourable member|examine the
figures carefully|increase the budget|reconsider the decision""".replace(
    "\n", " ").split("|")
D_REASONS = """it will protect working families|it fails the people of my
constituency|it places an unfair burden on small businesses|it restores
confidence in public services|the government has ignored the evidence|it
ends years of neglect|the costs have not been properly examined|it gives
local communities a real voice""".replace("\n", " ").split("|")
D_STANCE = """support|oppose|welcome|reject|question""".split("|")


def debate_sentence(rng):
    k = rng.randrange(9)
    if k == 0:
        return (f"{pick(rng, D_OPEN)} I rise to {pick(rng, D_STANCE)} "
                f"{pick(rng, D_BILLS)} because {pick(rng, D_REASONS).strip()}.")
    if k == 1:
        return (f"The honourable member for {place(rng)} has raised the question "
                f"of {pick(rng, D_ISSUES).strip()}, and the government will "
                f"{pick(rng, D_ACTIONS).strip()}.")
    if k == 2:
        return (f"Will the minister tell the house what steps are being taken to "
                f"address {pick(rng, D_ISSUES).strip()} in {place(rng)}?")
    if k == 3:
        return (f"My constituents in {place(rng)} have waited "
                f"{pick(rng, NUMS)} years for action on "
                f"{pick(rng, D_ISSUES).strip()}, and they deserve better.")
    if k == 4:
        return (f"I am grateful to the honourable lady, but the figures show "
                f"that {pick(rng, NUMS)} families in {region(rng)} are affected.")
    if k == 5:
        return (f"The minister will know that {pick(rng, D_BILLS)} was debated in "
                f"{pick(rng, YEARS[-40:])} and that the committee asked the "
                f"government to {pick(rng, D_ACTIONS).strip()}.")
    if k == 6:
        return (f"Order. The honourable gentleman must withdraw that remark"
                f"{maybe(rng, 0.5, ' before the debate can continue')}.")
    if k == 7:
        return (f"I give way to the right honourable member for {place(rng)}, "
                f"who I know has taken a close interest in "
                f"{pick(rng, D_ISSUES).strip()}.")
    return (f"The government {pick(rng, ['will', 'must', 'cannot', 'should'])} "
            f"{pick(rng, D_ACTIONS).strip()}, and I urge the house to "
            f"{pick(rng, D_STANCE)} the motion.")


def document(rng, sentence_fn):
    return " ".join(sentence_fn(rng) for _ in range(rng.randrange(1, 4)))


def write_split(out_dir, name, docs):
    parts = {
        "a": docs[:TRAIN_DOCS],
        "b": docs[TRAIN_DOCS:2 * TRAIN_DOCS],
        "eval": docs[2 * TRAIN_DOCS:],
    }
    for suffix, lines in parts.items():
        path = os.path.join(out_dir, f"{name}_{suffix}.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(" ".join(line.split()) + "\n")


def main():
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "fixtures")
    os.makedirs(out_dir, exist_ok=True)
    for name, fn, offset in (("encyclopedic", encyclopedic_sentence, 0),
                             ("debate", debate_sentence, 1)):
        rng = random.Random(SEED + offset)
        docs = [document(rng, fn) for _ in range(DOCS_PER_CORPUS)]
        write_split(out_dir, name, docs)


if __name__ == "__main__":
    main()
