#!/usr/bin/env python3
"""Writes the bundled fixture set: five five-turn conversations, one per domain.

Each turn's evidence pool holds the items that answer it, items from the rest of the
conversation's fact bank (so memory has something to recall), and unrelated distractors.
Re-running this script reproduces fixtures/ byte for byte.
"""

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def entity(eid, label, *aliases):
    return {"id": eid, "label": label, "aliases": list(aliases)}


ENTITIES = {
    e["id"]: e
    for e in [
        entity("Q_kida", "Kid A"),
        entity("Q_radiohead", "Radiohead"),
        entity("Q_rollingstone", "Rolling Stone", "RS"),
        entity("Q_shachtman", "Noah Shachtman"),
        entity("Q_wenner", "Jann Wenner"),
        entity("Q_gleason", "Ralph J. Gleason"),
        entity("Q_sf", "San Francisco", "SF"),
        entity("Q_uk", "United Kingdom", "UK"),
        entity("Q_us", "United States", "US", "USA"),
        entity("Q_parlophone", "Parlophone"),
        entity("Q_okcomputer", "OK Computer"),
        entity("Q_hobbit", "The Hobbit"),
        entity("Q_tolkien", "J. R. R. Tolkien", "Tolkien"),
        entity("Q_allen", "George Allen & Unwin", "Allen & Unwin"),
        entity("Q_lotr", "The Lord of the Rings"),
        entity("Q_bloemfontein", "Bloemfontein"),
        entity("Q_oxford", "Oxford"),
        entity("Q_inception", "Inception"),
        entity("Q_nolan", "Christopher Nolan", "Nolan"),
        entity("Q_zimmer", "Hans Zimmer"),
        entity("Q_london", "London"),
        entity("Q_dicaprio", "Leonardo DiCaprio"),
        entity("Q_wb", "Warner Bros.", "Warner Bros"),
        entity("Q_barca", "FC Barcelona", "Barcelona", "Barca"),
        entity("Q_campnou", "Camp Nou"),
        entity("Q_gamper", "Joan Gamper"),
        entity("Q_laliga", "La Liga"),
        entity("Q_spain", "Spain"),
        entity("Q_messi", "Lionel Messi", "Messi"),
        entity("Q_bb", "Breaking Bad"),
        entity("Q_gilligan", "Vince Gilligan"),
        entity("Q_amc", "AMC"),
        entity("Q_cranston", "Bryan Cranston"),
        entity("Q_albuquerque", "Albuquerque"),
        entity("Q_bcs", "Better Call Saul"),
    ]
}


def refs(*ids):
    return [ENTITIES[i] for i in ids]


def kb(eid, s, p, o, *ents):
    return {"evidence_id": eid, "source_kind": "kb", "article_title": None,
            "payload": {"subject": s, "predicate": p, "object": o}, "entities": refs(*ents)}


def text(eid, title, passage, *ents):
    return {"evidence_id": eid, "source_kind": "text", "article_title": title,
            "payload": {"text": passage}, "entities": refs(*ents)}


def table(eid, title, headers, cells, *ents):
    return {"evidence_id": eid, "source_kind": "table", "article_title": title,
            "payload": {"headers": headers, "cells": cells}, "entities": refs(*ents)}


def infobox(eid, title, pairs, *ents, header=None):
    payload = {"pairs": [list(p) for p in pairs]}
    if header is not None:
        payload["header"] = header
    return {"evidence_id": eid, "source_kind": "infobox", "article_title": title,
            "payload": payload, "entities": refs(*ents)}


ACCOLADE = ["Publication", "Country", "Accolade", "Year", "Rank"]

CONVERSATIONS = [
    {
        "conv_id": "music-kid-a",
        "domain": "music",
        "turns": [
            ("What is the release date of album Kid A?", "2 October 2000", [], "kb"),
            ("Fact Rank?", "7", [], "table"),
            ("Ranking on Rolling Stone in 2009?", "1", [], "table"),
            ("Who is the editor of Rolling Stone?", "Noah Shachtman", [], "infobox"),
            ("Founded in which city?", "San Francisco", ["SF"], "infobox"),
        ],
        "bank": [
            kb("ka-kb1", "Kid A", "publication date", "2 October 2000", "Q_kida"),
            kb("ka-kb2", "Kid A", "performer", "Radiohead", "Q_kida", "Q_radiohead"),
            kb("ka-kb3", "Kid A", "record label", "Parlophone", "Q_kida", "Q_parlophone"),
            table("ka-tb1", "Kid A", ACCOLADE, ["Fact", "UK", "The 100 Best Albums of the 2000s", "2010", "7"],
                  "Q_kida", "Q_uk"),
            table("ka-tb2", "Kid A", ACCOLADE,
                  ["Rolling Stone", "US", "The 100 Best Albums of the decade", "2009", "1"],
                  "Q_kida", "Q_rollingstone", "Q_us"),
            table("ka-tb3", "Kid A", ACCOLADE, ["Pitchfork", "US", "Top 200 Albums of the 2000s", "2009", "1"],
                  "Q_kida", "Q_us"),
            text("ka-tx1", "Kid A",
                 "Kid A is the fourth studio album by the English rock band Radiohead. It was released in 2000 "
                 "after the success of OK Computer.", "Q_kida", "Q_radiohead", "Q_okcomputer"),
            infobox("ka-ib1", "Rolling Stone", [("Editor", "Noah Shachtman")], "Q_rollingstone", "Q_shachtman"),
            infobox("ka-ib2", "Rolling Stone", [("Categories", "Popular culture")], "Q_rollingstone"),
            infobox("ka-ib3", "Rolling Stone", [("Founded", "1967"), ("Based in", "New York City")],
                    "Q_rollingstone"),
            infobox("ka-ib4", "Rolling Stone", [("Founder", "Jann Wenner"), ("Location", "San Francisco")],
                    "Q_rollingstone", "Q_wenner", "Q_sf", header="History"),
            text("ka-tx2", "Rolling Stone",
                 "Rolling Stone was founded in San Francisco in 1967 by Jann Wenner and Ralph J. Gleason.",
                 "Q_rollingstone", "Q_sf", "Q_wenner", "Q_gleason"),
        ],
        "pools": [
            ["ka-kb1", "ka-kb2", "ka-kb3", "ka-tx1", "ka-tb1"],
            ["ka-tb1", "ka-tb3", "ka-kb2", "ka-tx1"],
            ["ka-tb1", "ka-tb2", "ka-tb3", "ka-kb1", "ka-ib2"],
            ["ka-ib1", "ka-ib2", "ka-ib3", "ka-tx2", "ka-tb2"],
            ["ka-ib3", "ka-ib4", "ka-tx2", "ka-ib2"],
        ],
    },
    {
        "conv_id": "books-hobbit",
        "domain": "books",
        "turns": [
            ("Who wrote The Hobbit?", "J. R. R. Tolkien", ["Tolkien"], "kb"),
            ("When was it published?", "21 September 1937", [], "infobox"),
            ("Which company published it?", "George Allen & Unwin", ["Allen & Unwin"], "infobox"),
            ("What is the sequel?", "The Lord of the Rings", [], "text"),
            ("Where was the author born?", "Bloemfontein", [], "text"),
        ],
        "bank": [
            kb("hb-kb1", "The Hobbit", "author", "J. R. R. Tolkien", "Q_hobbit", "Q_tolkien"),
            kb("hb-kb2", "The Hobbit", "followed by", "The Lord of the Rings", "Q_hobbit", "Q_lotr"),
            kb("hb-kb3", "J. R. R. Tolkien", "place of birth", "Bloemfontein", "Q_tolkien", "Q_bloemfontein"),
            infobox("hb-ib1", "The Hobbit", [("Published", "21 September 1937")], "Q_hobbit"),
            infobox("hb-ib2", "The Hobbit", [("Publisher", "George Allen & Unwin")], "Q_hobbit", "Q_allen"),
            infobox("hb-ib3", "The Hobbit", [("Pages", "310"), ("Genre", "Fantasy")], "Q_hobbit"),
            text("hb-tx1", "The Hobbit",
                 "The Hobbit is a children's fantasy novel by J. R. R. Tolkien. Its sequel is The Lord of the Rings.",
                 "Q_hobbit", "Q_tolkien", "Q_lotr"),
            text("hb-tx2", "J. R. R. Tolkien",
                 "Tolkien was born in Bloemfontein in 1892. He later taught at Oxford.",
                 "Q_tolkien", "Q_bloemfontein", "Q_oxford"),
            table("hb-tb1", "The Hobbit", ["Edition", "Year", "Publisher"], ["First", "1937", "George Allen & Unwin"],
                  "Q_hobbit", "Q_allen"),
        ],
        "pools": [
            ["hb-kb1", "hb-tx1", "hb-ib3", "hb-kb2"],
            ["hb-ib1", "hb-ib3", "hb-tb1", "hb-kb1"],
            ["hb-ib2", "hb-tb1", "hb-ib1", "hb-ib3"],
            ["hb-tx1", "hb-kb2", "hb-ib3"],
            ["hb-tx2", "hb-kb3", "hb-kb1"],
        ],
    },
    {
        "conv_id": "movies-inception",
        "domain": "movies",
        "turns": [
            ("Who directed Inception?", "Christopher Nolan", ["Nolan"], "kb"),
            ("Release year?", "2010", [], "infobox"),
            ("Who composed the score?", "Hans Zimmer", [], "text"),
            ("How many Academy Awards did it win?", "4", [], "table"),
            ("Where was the director born?", "London", [], "kb"),
        ],
        "bank": [
            kb("in-kb1", "Inception", "director", "Christopher Nolan", "Q_inception", "Q_nolan"),
            kb("in-kb2", "Inception", "cast member", "Leonardo DiCaprio", "Q_inception", "Q_dicaprio"),
            kb("in-kb3", "Christopher Nolan", "place of birth", "London", "Q_nolan", "Q_london"),
            infobox("in-ib1", "Inception", [("Release", "2010"), ("Running time", "148 minutes")], "Q_inception"),
            infobox("in-ib2", "Inception", [("Distributed by", "Warner Bros.")], "Q_inception", "Q_wb"),
            text("in-tx1", "Inception",
                 "The score was composed by Hans Zimmer. Nolan wrote the screenplay.",
                 "Q_inception", "Q_zimmer", "Q_nolan"),
            table("in-tb1", "Inception", ["Award", "Nominations", "Wins"], ["Academy Awards", "8", "4"], "Q_inception"),
            table("in-tb2", "Inception", ["Award", "Nominations", "Wins"], ["BAFTA Awards", "9", "3"], "Q_inception"),
            text("in-tx2", "Christopher Nolan", "Christopher Nolan was born in London in 1970.", "Q_nolan", "Q_london"),
        ],
        "pools": [
            ["in-kb1", "in-kb2", "in-ib2", "in-tx1"],
            ["in-ib1", "in-ib2", "in-kb2"],
            ["in-tx1", "in-kb1", "in-ib1", "in-tb2"],
            ["in-tb1", "in-tb2", "in-ib1"],
            ["in-kb3", "in-tx2", "in-kb1"],
        ],
    },
    {
        "conv_id": "soccer-barcelona",
        "domain": "soccer",
        "turns": [
            ("What is the home stadium of FC Barcelona?", "Camp Nou", [], "kb"),
            ("Stadium capacity?", "99,354", [], "infobox"),
            ("Who founded the club?", "Joan Gamper", [], "text"),
            ("Year founded?", "1899", [], "infobox"),
            ("Which league does it play in?", "La Liga", [], "table"),
        ],
        "bank": [
            kb("fc-kb1", "FC Barcelona", "home venue", "Camp Nou", "Q_barca", "Q_campnou"),
            kb("fc-kb2", "FC Barcelona", "country", "Spain", "Q_barca", "Q_spain"),
            infobox("fc-ib1", "Camp Nou", [("Capacity", "99,354")], "Q_campnou"),
            infobox("fc-ib2", "FC Barcelona", [("Founded", "29 November 1899")], "Q_barca"),
            infobox("fc-ib3", "FC Barcelona", [("Founded", "1899"), ("Ground", "Camp Nou")], "Q_barca", "Q_campnou",
                    header="Club information"),
            text("fc-tx1", "FC Barcelona",
                 "The club was founded in 1899 by a group of footballers led by Joan Gamper. Lionel Messi is its top scorer.",
                 "Q_barca", "Q_gamper", "Q_messi"),
            table("fc-tb1", "FC Barcelona", ["Season", "League", "Position"], ["2022-23", "La Liga", "1st"],
                  "Q_barca", "Q_laliga"),
            table("fc-tb2", "FC Barcelona", ["Season", "League", "Position"], ["2021-22", "La Liga", "2nd"],
                  "Q_barca", "Q_laliga"),
        ],
        "pools": [
            ["fc-kb1", "fc-kb2", "fc-ib3"],
            ["fc-ib1", "fc-kb1", "fc-tb2"],
            ["fc-tx1", "fc-kb2", "fc-ib2"],
            ["fc-ib3", "fc-ib2", "fc-tx1"],
            ["fc-tb1", "fc-tb2", "fc-kb2"],
        ],
    },
    {
        "conv_id": "tv-breaking-bad",
        "domain": "tv_series",
        "turns": [
            ("Who created Breaking Bad?", "Vince Gilligan", [], "kb"),
            ("Original network?", "AMC", [], "infobox"),
            ("Number of seasons?", "5", [], "infobox"),
            ("Who played the lead role?", "Bryan Cranston", [], "table"),
            ("When did it first air?", "20 January 2008", [], "text"),
        ],
        "bank": [
            kb("bb-kb1", "Breaking Bad", "creator", "Vince Gilligan", "Q_bb", "Q_gilligan"),
            kb("bb-kb2", "Breaking Bad", "narrative location", "Albuquerque", "Q_bb", "Q_albuquerque"),
            kb("bb-kb3", "Better Call Saul", "based on", "Breaking Bad", "Q_bcs", "Q_bb"),
            infobox("bb-ib1", "Breaking Bad", [("Original network", "AMC")], "Q_bb", "Q_amc"),
            infobox("bb-ib2", "Breaking Bad", [("No. of seasons", "5"), ("No. of episodes", "62")], "Q_bb"),
            table("bb-tb1", "Breaking Bad", ["Actor", "Character"], ["Bryan Cranston", "Walter White"],
                  "Q_bb", "Q_cranston"),
            table("bb-tb2", "Breaking Bad", ["Actor", "Character"], ["Aaron Paul", "Jesse Pinkman"], "Q_bb"),
            text("bb-tx1", "Breaking Bad",
                 "Breaking Bad first aired on AMC on 20 January 2008. The series is set in Albuquerque.",
                 "Q_bb", "Q_amc", "Q_albuquerque"),
        ],
        "pools": [
            ["bb-kb1", "bb-kb2", "bb-kb3", "bb-tb2"],
            ["bb-ib1", "bb-ib2", "bb-kb1"],
            ["bb-ib2", "bb-tb1", "bb-kb3"],
            ["bb-tb1", "bb-tb2", "bb-ib1"],
            ["bb-tx1", "bb-ib1", "bb-kb2"],
        ],
    },
]


# Hand-scored per-turn records for the `eval` subcommand. Columns: conv_id, domain, turn,
# answer_source, answer_type, gold, generated, normalized ranking (top 5), hit1, hit5.
EVAL_RECORDS = [
    ("m1", "music", 1, "kb", "Date", "2 October 2000", "2 October 2000", ["2 October 2000"], True, True),
    ("m1", "music", 2, "table", "Number", "7", "9", ["1", "7", "2009"], False, True),
    ("m1", "music", 3, "table", "Number", "1", "1", ["1"], True, True),
    ("m1", "music", 4, "infobox", "String", "Noah Shachtman", "Jann Wenner", ["Jann Wenner", "Ralph J. Gleason"], False, False),
    ("m1", "music", 5, "infobox", "String", "San Francisco", "san francisco", ["San Francisco"], True, True),
    ("b1", "books", 1, "kb", "String", "J. R. R. Tolkien", "Tolkien", ["J. R. R. Tolkien"], True, True),
    ("b1", "books", 2, "infobox", "Date", "21 September 1937", "1954", ["The Lord of the Rings", "Oxford"], False, False),
    ("b1", "books", 3, "infobox", "String", "George Allen & Unwin", "Oxford", ["Oxford", "George Allen & Unwin"], False, True),
    ("b1", "books", 4, "text", "String", "The Lord of the Rings", "Lord of the Rings", ["The Lord of the Rings"], True, True),
    ("b1", "books", 5, "text", "String", "Bloemfontein", "Oxford", ["Oxford", "The Hobbit"], False, False),
    ("s1", "soccer", 1, "kb", "String", "Camp Nou", "Camp Nou", ["Camp Nou"], True, True),
    ("s1", "soccer", 2, "infobox", "Number", "99,354", "90,000", ["Camp Nou", "Spain"], False, False),
    ("s1", "soccer", 3, "text", "String", "Joan Gamper", "Messi", ["Lionel Messi", "Joan Gamper"], False, True),
    ("s1", "soccer", 4, None, "Date", "1899", "1899", ["1899"], True, True),
    ("s1", "soccer", 5, "table", "String", "La Liga", "Spain", ["Spain", "FC Barcelona"], False, False),
    ("t1", "tv_series", 1, "kb", "String", "Vince Gilligan", "Bryan Cranston",
     ["Bryan Cranston", "Vince Gilligan", "AMC"], False, True),
    ("t1", "tv_series", 2, "infobox", "String", "AMC", "AMC", ["AMC"], True, True),
    ("t1", "tv_series", 3, "infobox", "Number", "5", "62", ["Breaking Bad", "AMC"], False, False),
    ("t1", "tv_series", 4, "table", "String", "Bryan Cranston", "Cranston", ["Bryan Cranston", "Breaking Bad"], True, True),
    ("t1", "tv_series", 5, "text", "Date", "20 January 2008", "2013", ["Albuquerque", "AMC"], False, False),
]


def eval_records():
    out = []
    for conv, domain, turn, source, kind, gold, generated, ranking, hit1, hit5 in EVAL_RECORDS:
        out.append({"conv_id": conv, "turn": turn, "domain": domain, "answer_source": source,
                    "generated": generated, "normalized": ranking[0], "ranking": ranking, "gold": gold,
                    "gold_aliases": [], "hit1": hit1, "hit5": hit5, "answer_type": kind})
    return out


def main():
    ROOT.mkdir(parents=True, exist_ok=True)
    interactions, pools = [], []
    for conv in CONVERSATIONS:
        turns = []
        for index, (question, answer, aliases, source) in enumerate(conv["turns"], start=1):
            turn = {"index": index, "question": question, "answer": answer, "answer_source": source}
            if aliases:
                turn["answer_aliases"] = aliases
            turns.append(turn)
        interactions.append({"conv_id": conv["conv_id"], "domain": conv["domain"], "turns": turns})
        bank = {item["evidence_id"]: item for item in conv["bank"]}
        for index, ids in enumerate(conv["pools"], start=1):
            pools.append({"conv_id": conv["conv_id"], "turn": index, "evidence": [bank[i] for i in ids]})

    def dump(name, records):
        with open(ROOT / name, "w", encoding="utf-8", newline="\n") as f:
            for r in records:
                f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")

    dump("interactions.jsonl", interactions)
    dump("pools.jsonl", pools)
    dump("entities.jsonl", sorted(ENTITIES.values(), key=lambda e: e["id"]))
    dump("eval_records.jsonl", eval_records())
    return 0


if __name__ == "__main__":
    sys.exit(main())
