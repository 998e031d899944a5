#!/usr/bin/env python3
"""Writes the small datasets and the noisy zero-shot reply corpus under tests/data.

Deterministic: rerunning reproduces the committed files byte for byte.
"""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"

DISEASES = [
    "rheumatoid arthritis",
    "type 2 diabetes",
    "breast cancer",
    "asthma",
    "hypertension",
    "colorectal cancer",
    "multiple sclerosis",
    "cystic fibrosis",
    "psoriasis",
    "hepatitis C",
    "chronic kidney disease",
    "ovarian cancer",
]

TRAIN_FRAMES = [
    "Patients with {d} often report fatigue during the first year.",
    "The cohort included 120 adults diagnosed with {d} in 2015.",
    "Early screening for {d} reduced hospital admissions in the study.",
    "We reviewed the records of children treated for {d} at two clinics.",
]

TEST_FRAMES = [
    "A family history of {d} was recorded for most participants.",
    "Treatment response in {d} varied with age and sex.",
]

NEUTRAL = [
    "All samples were stored at room temperature before analysis.",
    "The authors declare no competing interests.",
]


def tokenize(sentence):
    tokens = []
    for word in sentence.split():
        tail = []
        while len(word) > 1 and word[-1] in ".,;:":
            tail.insert(0, word[-1])
            word = word[:-1]
        tokens.append(word)
        tokens.extend(tail)
    return tokens


def tag(sentence, mentions):
    tokens = tokenize(sentence)
    tags = ["O"] * len(tokens)
    for m in mentions:
        mt = m.split()
        for i in range(len(tokens) - len(mt) + 1):
            if [t.lower() for t in tokens[i : i + len(mt)]] == [t.lower() for t in mt] and tags[i] == "O":
                tags[i] = "B-Disease"
                for k in range(1, len(mt)):
                    tags[i + k] = "I-Disease"
    return tokens, tags


def conll(rows):
    out = []
    for tokens, tags in rows:
        out.extend(f"{t}\t{g}" for t, g in zip(tokens, tags))
        out.append("")
    return "\n".join(out)


def ner_dataset():
    train = []
    for i, d in enumerate(DISEASES):
        for k in range(2):
            train.append(tag(TRAIN_FRAMES[(i + k) % len(TRAIN_FRAMES)].format(d=d), [d]))
    train.append(tag(NEUTRAL[0], []))
    test = []
    for i, d in enumerate(DISEASES):
        test.append(tag(TEST_FRAMES[i % len(TEST_FRAMES)].format(d=d), [d]))
    test.append(tag(NEUTRAL[1], []))
    test.append(tag("The symptoms suggest a possible case of rheumatoid arthritis.", ["rheumatoid arthritis"]))
    d = OUT / "ner"
    d.mkdir(parents=True, exist_ok=True)
    (d / "train.conll").write_text(conll(train))
    (d / "test.conll").write_text(conll(test))
    (d / "manifest.txt").write_text(
        "name: ncbi-disease\ntask: NER\ntrain: train.conll\ntest: test.conll\nentity_types: Disease\n"
    )
    return test


RE_YES = [
    "Polymorphisms in @GENE$ were significantly associated with @DISEASE$ risk.",
    "Carriers of the @GENE$ variant showed a higher incidence of @DISEASE$.",
    "Expression of @GENE$ was elevated in tissue from patients with @DISEASE$.",
    "The @GENE$ allele conferred susceptibility to @DISEASE$ in this population.",
]
RE_NO = [
    "No association was found between @GENE$ genotypes and @DISEASE$.",
    "@GENE$ variants did not differ between @DISEASE$ cases and controls.",
    "The frequency of @GENE$ alleles was similar in @DISEASE$ patients and healthy subjects.",
    "We observed no effect of @GENE$ on the progression of @DISEASE$.",
]


def re_rows(n, offset):
    rows = []
    for i in range(n):
        frames = RE_YES if i % 2 == 0 else RE_NO
        label = "Yes" if i % 2 == 0 else "No"
        frame = frames[(i // 2 + offset) % len(frames)]
        # The gene name is context only; sentences carry placeholders.
        rows.append((frame + f" (cohort {offset * 100 + i + 1})", label))
    return rows


def re_dataset():
    d = OUT / "re"
    d.mkdir(parents=True, exist_ok=True)
    train = re_rows(40, 0)
    test = re_rows(16, 3)
    (d / "train.tsv").write_text("".join(f"{s}\t{l}\n" for s, l in train))
    (d / "test.tsv").write_text("".join(f"{s}\t{l}\n" for s, l in test))
    (d / "manifest.txt").write_text("name: gad\ntask: RE\ntrain: train.tsv\ntest: test.tsv\n")
    return test


def iob_lines(tokens, tags, sep="\t"):
    return "\n".join(f"{t}{sep}{g}" for t, g in zip(tokens, tags))


def noisy_ner(test):
    """25 NER replies covering the output shapes a chat model produces."""
    items = []
    shapes = [
        ("clean", lambda t, g: iob_lines(t, g)),
        ("code-fence", lambda t, g: "```\n" + iob_lines(t, g) + "\n```"),
        ("preamble", lambda t, g: "Here is the IOB output:\n\n" + iob_lines(t, g)),
        ("space-separated", lambda t, g: iob_lines(t, g, " ")),
        ("wide-gap", lambda t, g: iob_lines(t, g, "    ")),
        ("lowercase-tags", lambda t, g: iob_lines(t, [x.lower() for x in g])),
        ("merged-entity", lambda t, g: merged(t, g)),
        ("extra-leading-token", lambda t, g: "Output:\tO\n" + iob_lines(t, g)),
        ("dropped-punctuation", lambda t, g: iob_lines([x for x in t if x != "."], [y for x, y in zip(t, g) if x != "."])),
        ("orphan-inside", lambda t, g: iob_lines(t, [x.replace("B-", "I-") for x in g])),
        ("unknown-type", lambda t, g: iob_lines(t, [x.replace("Disease", "Chemical") for x in g])),
        ("refusal", lambda t, g: "I'm sorry, but I can't help with labeling this text."),
        ("empty", lambda t, g: ""),
        ("trailing-explanation", lambda t, g: iob_lines(t, g) + "\n\nNote: the disease entity is tagged above."),
        ("crlf", lambda t, g: iob_lines(t, g).replace("\n", "\r\n")),
        ("split-token", lambda t, g: split_token(t, g)),
        ("garbage-tag", lambda t, g: iob_lines(t, ["ENTITY" if x != "O" else "O" for x in g])),
        ("markdown-table", lambda t, g: "| Word | Label |\n|---|---|\n" + "\n".join(f"| {a} | {b} |" for a, b in zip(t, g))),
        ("json-ish", lambda t, g: json.dumps(dict(zip(t, g)))),
        ("underscore-tags", lambda t, g: iob_lines(t, [x.replace("-", "_") for x in g])),
        ("numbered", lambda t, g: "\n".join(f"{i + 1}. {a}\t{b}" for i, (a, b) in enumerate(zip(t, g)))),
        ("all-o", lambda t, g: iob_lines(t, ["O"] * len(t))),
        ("partial", lambda t, g: iob_lines(t[: len(t) // 2], g[: len(t) // 2])),
        ("one-line", lambda t, g: " ".join(f"{a}\t{b}" for a, b in zip(t, g))),
        ("fence-with-lang", lambda t, g: "```text\n" + iob_lines(t, g) + "\n```\nLet me know if you need more."),
    ]
    for i, (name, fn) in enumerate(shapes):
        tokens, tags = test[i % len(test)]
        items.append({"id": f"ner-{i:02d}", "task": "NER", "shape": name, "tokens": tokens, "tags": tags,
                      "reply": fn(tokens, tags)})
    return items


def merged(tokens, tags):
    out_t, out_g = [], []
    i = 0
    while i < len(tokens):
        if tags[i].startswith("B-") and i + 1 < len(tokens) and tags[i + 1].startswith("I-"):
            j = i + 1
            while j < len(tokens) and tags[j].startswith("I-"):
                j += 1
            out_t.append(" ".join(tokens[i:j]).replace(" ", ""))
            out_g.append(tags[i])
            i = j
        else:
            out_t.append(tokens[i])
            out_g.append(tags[i])
            i += 1
    return iob_lines(out_t, out_g)


def split_token(tokens, tags):
    out_t, out_g = [], []
    for t, g in zip(tokens, tags):
        if len(t) > 6 and g == "O":
            out_t += [t[:3], t[3:]]
            out_g += ["O", "O"]
        else:
            out_t.append(t)
            out_g.append(g)
    return iob_lines(out_t, out_g)


def noisy_re(test):
    """25 RE replies; the ones marked invalid carry no unambiguous Yes/No on their first line."""
    replies = [
        ("Yes", False),
        ("No", False),
        ("Yes.", False),
        ("No, there is no relation between the gene and the disease.", False),
        ("**Yes**", False),
        ("It depends.", True),
        ("yes", False),
        ("NO", False),
        ("Yes and no; the evidence is mixed.", True),
        ("\n\nYes\n", False),
        ("I cannot determine this from the sentence.", True),
        ("Answer: Yes", False),
        ("No.\nThe sentence reports no association.", False),
        ("", True),
        ("The relation is unclear.\nYes", True),
        ("Yes, the gene is associated with the disease.", False),
        ("\"No\"", False),
        ("Maybe.", True),
        ("Yes - there is an associative connection.", False),
        ("No relation.", False),
        ("As an AI model I cannot give medical advice.", True),
        ("Yes/No", True),
        ("Label: No", False),
        ("YES!", False),
        ("Relation: yes", False),
    ]
    items = []
    for i, (reply, invalid) in enumerate(replies):
        sentence, label = test[i % len(test)]
        items.append({"id": f"re-{i:02d}", "task": "RE", "sentence": sentence, "label": label, "reply": reply,
                      "planted_invalid": invalid})
    return items


def main():
    ner_test = ner_dataset()
    re_test = re_dataset()
    items = noisy_ner(ner_test) + noisy_re(re_test)
    assert len(items) == 50
    (OUT / "noisy_replies.jsonl").write_text("".join(json.dumps(x, ensure_ascii=False) + "\n" for x in items))
    planted = sum(1 for x in items if x.get("planted_invalid"))
    print(f"wrote {len(items)} replies, {planted} planted invalid RE replies of {sum(1 for x in items if x['task'] == 'RE')}")


if __name__ == "__main__":
    main()
