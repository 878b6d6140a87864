"""Seeded templated micro-corpus for training the toy question generator.

Three scenario families (uniform costs, boxes of goods, pages of a book)
each come with several (equation, question) templates.
"""

from __future__ import annotations

import random

PLACES = ["school", "factory", "club", "company"]
PEOPLE = ["students", "workers", "members", "players"]
GARMENTS = ["shirt", "hat", "coat", "jacket", "tie", "skirt"]
GOODS = ["candy", "cookies", "chocolate", "tea", "nuts", "rice"]
NAMES = ["Uncle Li", "Aunt Wang", "Tom", "Lily", "Xiao Ming"]


def _price(rng: random.Random) -> str:
    if rng.random() < 0.3:
        return f"{rng.randint(2, 40)}.{rng.randint(1, 9)}"
    return str(rng.randint(2, 60))


def _distinct(rng: random.Random, make, k: int) -> list[str]:
    out: list[str] = []
    while len(out) < k:
        v = make(rng)
        if v not in out:
            out.append(v)
    return out


def _fresh(rng: random.Random, make, taken) -> str:
    values = {float(t) for t in taken}
    while True:
        v = make(rng)
        if float(v) not in values:
            return v


def _uniforms(rng: random.Random) -> tuple[str, list[tuple[str, str]]]:
    place, people = rng.choice(PLACES), rng.choice(PEOPLE)
    o1, o2 = rng.sample(GARMENTS, 2)
    p1, p2 = _distinct(rng, _price, 2)
    n = _fresh(rng, lambda r: str(r.randint(12, 90)), (p1, p2))
    scenario = (f"The {place} makes uniforms for {n} {people}, known to be {p1} dollars per {o1} "
                f"and {p2} dollars per {o2}.")
    pairs = [
        (f"x={p1}+{p2}", "How much did it cost to make a uniform?"),
        (f"x={n}*{p1}", f"How much did it cost to make the {o1} for all {people}?"),
        (f"x={n}*{p2}", f"How much did it cost to make the {o2} for all {people}?"),
        (f"x={n}*({p1}+{p2})", "How much did it cost to make these uniforms?"),
        (f"x={p1}-{p2}", f"How much more does a {o1} cost than a {o2}?"),
    ]
    return scenario, pairs


def _boxes(rng: random.Random) -> tuple[str, list[tuple[str, str]]]:
    g1, g2 = rng.sample(GOODS, 2)
    name = rng.choice(NAMES)
    p1, p2 = _distinct(rng, _price, 2)
    a = _fresh(rng, lambda r: str(r.randint(2, 9)), (p1, p2))
    b = _fresh(rng, lambda r: str(r.randint(2, 9)), (p1, p2, a))
    scenario = (f"The {g1} in the mall costs {p1} dollars per box and {g2} cost {p2} dollars per box. "
                f"{name} wants to buy {a} boxes of {g1} and {b} boxes of {g2}.")
    pairs = [
        (f"x=({p1}*{a})+({p2}*{b})", f"How much money does {name} need to bring?"),
        (f"x={p1}*{a}", f"How many dollars will it cost to buy the {g1}?"),
        (f"x={p2}*{b}", f"How many dollars will it cost to buy the {g2}?"),
        (f"x={p2}-{p1}", f"How much more expensive is each box of {g2} than each box of {g1}?"),
        (f"x={p1}/{p2}", f"How many times the price of each box of {g2} is the price of each box of {g1}?"),
        (f"x={a}+{b}", f"How many boxes does {name} buy in total?"),
    ]
    return scenario, pairs


def _pages(rng: random.Random) -> tuple[str, list[tuple[str, str]]]:
    name = rng.choice(NAMES)
    a, b = (str(v) for v in rng.sample(range(20, 400), 2))
    scenario = f"{name} has read {a} pages of a book and has {b} pages left to read."
    pairs = [
        (f"x={a}+{b}", "How many pages are there in this book?"),
        (f"x={a}-{b}", "How many more pages have been read than have not been read?"),
        (f"x={a}/{b}", "How many times more pages have been read than have not been read?"),
        (f"x={b}/({a}+{b})", f"What fraction of the book does {name} still have to read?"),
    ]
    return scenario, pairs


FAMILIES = (_uniforms, _boxes, _pages)


def micro_corpus(n: int = 200, seed: int = 0) -> list[dict]:
    """``n`` records ``{scenario, question, equation}``, reproducible from ``seed``."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        scenario, pairs = rng.choice(FAMILIES)(rng)
        equation, question = rng.choice(pairs)
        out.append({"scenario": scenario, "question": question, "equation": equation})
    return out
