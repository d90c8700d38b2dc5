#!/usr/bin/env python3
"""Regenerate the bundled pizza-review fixture corpus.

Writes crates/core/tests/fixtures/pizza_reviews.csv with a `stars,text`
header. Output is deterministic for a fixed seed.
"""
import csv
import random
import sys
from pathlib import Path

SEED = 20201231
PER_CLASS = 324
NEUTRAL_3_STAR = 24

FOODS = ["pizza", "crust", "sauce", "cheese", "pepperoni", "garlic bread", "wings",
         "calzone", "salad", "meatball sub", "mushroom pizza", "thin crust", "deep dish",
         "slice", "breadsticks", "margherita", "sausage pizza", "cannoli"]
STAFF = ["service", "staff", "waitress", "manager", "delivery", "cashier", "driver"]
PLACES = ["this place", "the restaurant", "this spot", "the shop", "their downtown location"]

POS_SENT = [
    "the {food} was really tasty",
    "great {food} and friendly {staff}",
    "the {food} is very very good",
    "my absolutely favorite {food} in the city",
    "{place} deserves five stars",
    "everything we had was delicious",
    "the {staff} was fast and super friendly",
    "fresh ingredients and a perfect {food}",
    "highly recommend the {food}",
    "we will definitely be back",
    "the {food} was hot and fresh",
    "best {food} i have had in years",
    "reasonable prices and huge portions",
    "the {staff} helped us pick from the menu",
    "i'd definitely recommend it to everyone",
    "the {food} had the perfect amount of cheese",
    "cozy atmosphere and a great patio",
    "{place} is a neighbourhood favorite",
    "it was even tasty the next day",
    "amazing {food} with a crispy crust",
    "the {staff} was very accommodating",
    "loved the {food} and the {food2}",
]
NEG_SENT = [
    "the {food} was cold",
    "bad customer {staff}",
    "the {food} was very gross",
    "soggy crust and bland sauce",
    "not coming here again",
    "the ingredients were stale",
    "would not eat here again",
    "not very happy with the {staff}",
    "small portion size for the price",
    "very salty taste on the {food}",
    "late delivery and the {food} was burned",
    "dirty table and sticky floors",
    "i want my money back",
    "very greasy {food}",
    "never again",
    "the {staff} was rude and incompetent",
    "the {food} was nasty and stale",
    "waited an hour for a cold {food}",
    "the {manager} did not care at all",
    "disgusting {food} and angry {staff}",
    "{place} was a huge disappointment",
    "the {food} tasted like cardboard",
]
NEUTRAL_SENT = [
    "we ordered the {food} and the {food2}",
    "we came here on a friday night",
    "parking was on the street",
    "they also have beer on tap",
    "we got a large {food} to share",
    "the menu has a lot of options",
    "i came here with my family",
    "{place} is near the highway",
    "we ordered delivery on a sunday",
    "the {food} comes in two sizes",
]
HEDGE_POS = ["the {staff} was a bit slow", "parking was a pain", "the {food} was a little salty"]
HEDGE_NEG = ["the {food2} was okay i guess", "the {staff} was friendly enough", "prices are fair"]


def fill(rng, template):
    return template.format(
        food=rng.choice(FOODS), food2=rng.choice(FOODS), staff=rng.choice(STAFF),
        place=rng.choice(PLACES), manager="manager")


def review(rng, polar, hedge, opposite):
    n = rng.randint(2, 6)
    # a share of reviews read mostly like the other class (mixed or sarcastic)
    if rng.random() < 0.12:
        polar, opposite = opposite, polar
    parts = []
    for _ in range(n):
        r = rng.random()
        if r < 0.40:
            parts.append(fill(rng, rng.choice(polar)))
        elif r < 0.72:
            parts.append(fill(rng, rng.choice(NEUTRAL_SENT)))
        elif r < 0.88:
            parts.append(fill(rng, rng.choice(hedge)))
        else:
            parts.append(fill(rng, rng.choice(opposite)))
    text = ". ".join(parts) + rng.choice([".", "!", "!!", "."])
    if rng.random() < 0.5:
        text = text[0].upper() + text[1:]
    return text


def main():
    rng = random.Random(SEED)
    rows = []
    for _ in range(PER_CLASS):
        rows.append((rng.choice([4, 5, 5]), review(rng, POS_SENT, HEDGE_POS, NEG_SENT)))
        rows.append((rng.choice([1, 1, 2]), review(rng, NEG_SENT, HEDGE_NEG, POS_SENT)))
    for _ in range(NEUTRAL_3_STAR):
        mix = POS_SENT[:6] + NEG_SENT[:6]
        rows.append((3, review(rng, mix, NEUTRAL_SENT, mix)))
    rng.shuffle(rows)
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else \
        Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/pizza_reviews.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stars", "text"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
