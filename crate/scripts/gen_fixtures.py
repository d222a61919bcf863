#!/usr/bin/env python3
"""Regenerate the offline fixtures under fixtures/.

    python3 scripts/gen_fixtures.py

Writes a small store dump (catalog plus recorded HTTP exchanges for replay)
and a 300-review curation corpus with its expected verdicts. Output is fully
determined by the seed below, so rerunning leaves the tree unchanged.
"""

import hashlib
import html
import json
import random
import shutil

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timedelta, timezone
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"
SEED = 20250301
FETCHED_AT = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)

CATEGORIES = ["action", "social", "horror", "puzzle", "simulation", "sports"]
TAGS = {
    "action": ["action", "shooter"],
    "social": ["social platform", "free to play"],
    "horror": ["survival horror", "atmospheric"],
    "puzzle": ["puzzle", "escape room"],
    "simulation": ["simulation", "casual"],
    "sports": ["sports", "fitness"],
}

DIMENSION_SENTENCES = {
    "vision": [
        "I have low vision and the menu text is far too tiny to read without leaning in.",
        "As a colorblind player I could not tell the red and green team markers apart.",
        "It is hard going for visually impaired people because nothing has spoken labels.",
        "My poor eyesight makes the floating labels useless since they cannot be resized.",
    ],
    "hearing": [
        "I am hard of hearing and there are no subtitles for any of the spoken story.",
        "Being deaf, I missed every warning because the cues are only sounds.",
        "Please add captions because my hearing loss means I lose half the dialogue.",
        "I wear a hearing aid and the mix of music and voices is a mess.",
    ],
    "motor": [
        "I play from a wheelchair and the seated mode still expects me to reach the floor.",
        "With arthritis in both wrists the constant trigger holding becomes painful fast.",
        "My tremor makes the precise aiming sections almost impossible to finish.",
        "I have limited mobility in my shoulder so the overhead grabs are a real problem.",
    ],
    "cognitive": [
        "With ADHD the tutorial dumps too many rules on me at the same time.",
        "I am autistic and the flashing lights plus crowd noise cause sensory overload.",
        "My dyslexia makes the long quest notes a real struggle to get through.",
        "After a brain injury I need more time, and the timers never let me catch up.",
    ],
    "vestibular": [
        "Smooth locomotion gave me motion sickness within ten minutes every time.",
        "I get nausea from the forced camera turns, so please add snap turning.",
        "There is no teleport option and I felt dizzy for an hour after playing.",
        "The spinning rides left me with vertigo even with the comfort vignette on.",
    ],
    "speech": [
        "I have a stutter and the voice commands never recognise what I say.",
        "As a nonverbal player I cannot join teams because everything needs voice chat.",
        "My speech impairment means the shouted spells simply fail most of the time.",
        "Everything relies on talking to other players, which is hard with my stuttering.",
    ],
}

# Misspelled variants that still fall inside the edit budget.
TYPO_SENTENCES = {
    "vestibular": ["The fast turning gave me motoin sickness almost right away.", "I was so dizy after the first level."],
    "hearing": ["There are no subtitels at all, which is rough for me.", "I rely on captoins and there are none."],
    "motor": ["I use a wheelchiar and the floor items are out of reach.", "My tremmor makes the small buttons hard."],
    "vision": ["I am colorblnd and the puzzle colours all look the same."],
    "cognitive": ["My dyslexa makes the written hints hard to follow."],
    "speech": ["I stuter and the voice chat lobby is stressful."],
}

FILLER = {
    "action": [
        "The gunplay feels punchy and the enemy waves keep you moving.",
        "Boss fights are the highlight and each one has a clever twist.",
        "Reloading by hand is satisfying once you learn the motions.",
    ],
    "social": [
        "The community is friendly and there are events every weekend.",
        "Making a custom avatar took me an hour and I loved every minute.",
        "Worlds made by other players are the main reason to come back.",
    ],
    "horror": [
        "The atmosphere is genuinely creepy and the sound design is superb.",
        "I jumped out of my chair twice in the first chapter alone.",
        "Exploring the old hospital with a flashlight is tense and memorable.",
    ],
    "puzzle": [
        "The puzzles ramp up nicely and the last rooms are really clever.",
        "Every room feels handmade and the solutions are fair.",
        "I finished it over a weekend and wanted more levels right after.",
    ],
    "simulation": [
        "The cockpit is modelled in great detail and the physics feel right.",
        "Managing the kitchen during the rush is chaotic in a fun way.",
        "There is a lot to learn but the career mode teaches it gradually.",
    ],
    "sports": [
        "It is a great workout and my arms are sore after every session.",
        "The rackets track well and the ball physics feel believable.",
        "Online matches were easy to find in the evenings.",
    ],
    "any": [
        "I bought it during the sale and have played about twenty hours so far.",
        "The developers have been patching it often and the updates are welcome.",
        "Overall it is a good purchase if you know what you are getting into.",
        "The graphics are lovely and the world feels alive when you first arrive.",
        "Controls take some practice but they become natural after a while.",
    ],
}

NON_ENGLISH = [
    "Игра очень красивая, но после десяти минут у меня кружится голова и появляется тошнота. Разработчики, пожалуйста, добавьте телепортацию и плавный поворот для комфорта игроков.",
    "とても楽しいゲームですが、字幕がないので耳が聞こえない私にはストーリーが分かりません。字幕機能を追加してください。お願いします。よろしく。",
    "Очень жаль, что нет субтитров. Я плохо слышу и пропускаю все важные диалоги в сюжете этой игры, хотя графика отличная.",
    "Juego muy bueno pero sufro mareos fuertes tras pocos minutos; ojalá pongan más opciones de comodidad para quienes sufrimos mareos.",
]

ADS = [
    "Use my referral link for a discount, it really helps me out and you get something too.",
    "Visit my channel for daily gameplay and promo code giveaways every single weekend.",
    "Cheap keys at my store, check out my store for the best prices on every new release.",
]
ABUSE = [
    "The devs are a bunch of idiots who never test anything before they ship it.",
    "Whoever designed this menu is a moron and should be embarrassed.",
    "Stupid devs ignored every single report about this problem for months.",
]


def osa(a, b):
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    return d[len(a)][len(b)]


def budget(tok):
    n = len(tok)
    return 0 if n <= 4 else (1 if n <= 8 else 2)


def tokens(text):
    out = []
    for raw in text.replace("’", "'").lower().split():
        start, end = 0, len(raw)
        while start < end and not raw[start].isalnum():
            start += 1
        while end > start and not raw[end - 1].isalnum():
            end -= 1
        t = raw[start:end]
        if t:
            out.append(t)
    return out


LEXICON = {
    dim: [p.split(" ") for p in phrases]
    for dim, phrases in tomllib.loads((ROOT / "config" / "lexicon.toml").read_text())["dimensions"].items()
}


def dims_of(text):
    toks = tokens(text)
    found = set()
    for dim, phrases in LEXICON.items():
        for p in phrases:
            for i in range(len(toks) - len(p) + 1):
                if all(osa(pt, toks[i + k]) <= budget(pt) for k, pt in enumerate(p)):
                    found.add(dim)
    return found


def check_banks():
    """Every sentence must signal exactly the dimensions it is filed under."""
    for cat, sents in FILLER.items():
        for s in sents:
            assert not dims_of(s), (cat, s, dims_of(s))
    for s in ADS + ABUSE:
        assert not dims_of(s), (s, dims_of(s))
    for bank in (DIMENSION_SENTENCES, TYPO_SENTENCES):
        for dim, sents in bank.items():
            for s in sents:
                assert dims_of(s) == {dim}, (dim, s, dims_of(s))


def filler(rng, category, n):
    pool = FILLER[category] + FILLER["any"]
    return rng.sample(pool, n)


def kept_body(rng, category, dims, typo=False):
    parts = []
    for d in dims:
        bank = TYPO_SENTENCES.get(d) if typo and d in TYPO_SENTENCES else DIMENSION_SENTENCES[d]
        parts.append(rng.choice(bank))
    parts += filler(rng, category, 2)
    rng.shuffle(parts)
    body = " ".join(parts)
    while len(body.split()) < 20:
        body += " " + rng.choice(FILLER["any"])
    return body


def short_body(rng, dims):
    words = (rng.choice(DIMENSION_SENTENCES[dims[0]]) if dims else rng.choice(FILLER["any"])).split()
    return " ".join(words[: min(len(words), rng.randint(5, 12))])


def exchange(url, body, status=200):
    return {"url": url, "status": status, "fetched_at": FETCHED_AT.strftime("%Y-%m-%dT%H:%M:%SZ"), "body": body}


def fixture_key(url):
    return hashlib.sha256(url.encode()).hexdigest()[:24] + ".json"


def write_json(path, value):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def review_plan(rng, category, n):
    """(body, dims) pairs for one app: mostly kept, a few of each exclusion."""
    dims_all = list(DIMENSION_SENTENCES)
    plan = []
    primary = PRIMARY_DIMENSION[category]
    for i in range(n):
        roll = i % 10
        if roll < 6:
            ds = [primary] if i % 3 else [rng.choice(dims_all)]
            if i % 4 == 0:
                ds.append(rng.choice([d for d in dims_all if d not in ds]))
            plan.append(kept_body(rng, category, ds, typo=(i % 5 == 1)))
        elif roll == 6:
            plan.append(short_body(rng, [primary]))
        elif roll == 7:
            plan.append(rng.choice(NON_ENGLISH))
        elif roll == 8:
            plan.append(" ".join(filler(rng, category, 3)))
        else:
            plan.append(rng.choice(ADS) + " " + rng.choice(DIMENSION_SENTENCES[primary]) + " " + filler(rng, category, 1)[0])
    return plan


PRIMARY_DIMENSION = {
    "action": "vestibular",
    "social": "speech",
    "horror": "hearing",
    "puzzle": "cognitive",
    "simulation": "motor",
    "sports": "vision",
}

STEAM_APPS = [
    ("100610", "Arena Breach VR", "action"),
    ("100620", "Plaza Together", "social"),
    ("100630", "Ward Seven", "horror"),
    ("100640", "Cube Vault", "puzzle"),
    ("100650", "Sky Captain Sim", "simulation"),
    ("100660", "Court Rally", "sports"),
]
META_APPS = [
    ("4100001", "Blade Rush", "action"),
    ("4100002", "Hangout Hub", "social"),
    ("4100003", "Night Shift Terror", "horror"),
    ("4100004", "Lock & Key", "puzzle"),
    ("4100005", "Kitchen Rush Simulator", "simulation"),
    ("4100006", "Box Fit", "sports"),
]


def app_descriptor(store, app_id, title, category, rank):
    return {
        "store": store,
        "app_id": app_id,
        "title": title,
        "official_description": f"{title} is a {category} experience for virtual reality headsets.",
        "raw_tags": TAGS[category],
        "popularity_rank": rank,
    }


def steam_url(app_id, cursor):
    return (
        f"https://store.steampowered.com/appreviews/{app_id}"
        f"?json=1&filter=recent&language=english&num_per_page=100&cursor={cursor}"
    )


def gen_store(rng):
    out = OUT / "store"
    if out.exists():
        shutil.rmtree(out)
    http = out / "http"
    catalog = []
    for rank, (app_id, title, cat) in enumerate(STEAM_APPS, start=1):
        catalog.append(app_descriptor("steam", app_id, title, cat, rank))
        reviews = []
        for i, body in enumerate(review_plan(rng, cat, 12)):
            posted = FETCHED_AT - timedelta(days=3 + 5 * i, hours=rng.randint(0, 23))
            reviews.append(
                {
                    "recommendationid": str(int(app_id) * 1000 + i),
                    "review": body,
                    "timestamp_created": int(posted.timestamp()),
                    "voted_up": rng.random() < 0.6,
                }
            )
        cursor2 = f"AoJ{app_id}p2"
        # The second page repeats the last review of the first to exercise dedup.
        pages = [("*", reviews[:8], cursor2), (cursor2, reviews[7:], cursor2)]
        for cursor, chunk, nxt in pages:
            url = steam_url(app_id, cursor)
            body = json.dumps({"success": 1, "query_summary": {"num_reviews": len(chunk)}, "reviews": chunk, "cursor": nxt})
            write_json(http / fixture_key(url), exchange(url, body))
    for rank, (app_id, title, cat) in enumerate(META_APPS, start=1):
        catalog.append(app_descriptor("metaquest", app_id, title, cat, rank))
        cards = []
        for i, body in enumerate(review_plan(rng, cat, 10)):
            posted = FETCHED_AT - timedelta(days=2 + 6 * i)
            cards.append(
                f'    <div class="review-card" data-review-id="mq-{app_id}-{i:02d}">\n'
                f'      <span class="review-stars" data-rating="{rng.randint(1, 5)}">★</span>\n'
                f'      <time class="review-date" datetime="{posted.strftime("%Y-%m-%dT%H:%M:%SZ")}">{posted:%b %d, %Y}</time>\n'
                f'      <p class="review-text">{html.escape(body)}</p>\n'
                f"    </div>\n"
            )
        page = (
            f"<!DOCTYPE html>\n<html><head><title>{html.escape(title)}</title></head><body>\n"
            f"  <h1>{html.escape(title)}</h1>\n"
            f"  <div data-testid=\"reviews-list\">\n{''.join(cards)}  </div>\n</body></html>\n"
        )
        url = f"https://www.meta.com/experiences/{app_id}/"
        write_json(http / fixture_key(url), exchange(url, page))
    write_jsonl(out / "apps.jsonl", catalog)


def gen_curation(rng):
    """300 raw reviews with the verdict each one must receive."""
    out = OUT / "curation"
    apps = [app_descriptor("steam", f"9{i:05d}", f"Fixture App {i}", cat, i + 1) for i, cat in enumerate(CATEGORIES)]
    rows, truth = [], []
    dims_all = list(DIMENSION_SENTENCES)
    for n in range(300):
        app = apps[n % len(apps)]
        cat = CATEGORIES[n % len(apps)]
        kind = rng.choices(
            ["kept", "kept_typo", "kept_multi", "too_short", "non_english", "advertisement", "abusive", "no_disability_signal"],
            weights=[30, 10, 10, 12, 8, 10, 10, 10],
        )[0]
        ds = []
        if kind in ("kept", "kept_typo"):
            ds = [rng.choice(dims_all)]
            body = kept_body(rng, cat, ds, typo=kind == "kept_typo")
        elif kind == "kept_multi":
            ds = rng.sample(dims_all, 2)
            body = kept_body(rng, cat, ds)
        elif kind == "too_short":
            ds = [rng.choice(dims_all)] if rng.random() < 0.7 else []
            body = short_body(rng, ds)
        elif kind == "non_english":
            body = rng.choice(NON_ENGLISH)
        elif kind in ("advertisement", "abusive"):
            ds = [rng.choice(dims_all)]
            bank = ADS if kind == "advertisement" else ABUSE
            body = " ".join([rng.choice(bank), rng.choice(DIMENSION_SENTENCES[ds[0]])] + filler(rng, cat, 1))
        else:
            body = " ".join(filler(rng, cat, 3))
        if rng.random() < 0.15:
            body = body.replace(" ", "  \n ", 2)
        expected_dims = sorted(dims_of(body))
        if kind in ("kept", "kept_typo", "kept_multi", "advertisement", "abusive", "too_short"):
            assert set(expected_dims) == set(ds), (kind, body, expected_dims, ds)
        exclusion = None if kind.startswith("kept") else kind
        if len(body.split()) < 20:
            exclusion = "too_short"
        review_id = f"cur-{n:03d}"
        posted = FETCHED_AT - timedelta(hours=n + 1)
        rows.append(
            {
                "review_id": review_id,
                "app": app,
                "body": body,
                "posted_at": posted.strftime("%Y-%m-%dT%H:%M:%SZ"),
                "fetched_at": FETCHED_AT.strftime("%Y-%m-%dT%H:%M:%SZ"),
            }
        )
        truth.append({"review_id": review_id, "category": cat, "exclusion": exclusion, "dimensions": expected_dims})
    write_jsonl(out / "raw_300.jsonl", rows)
    write_jsonl(out / "truth_300.jsonl", truth)


def main():
    check_banks()
    rng = random.Random(SEED)
    gen_store(rng)
    gen_curation(rng)


if __name__ == "__main__":
    main()
