#!/usr/bin/env python3
"""Regenerate the bundled lexicon and Traditional-script sample.

Inputs (not vendored):
  --jieba-dict   jieba's dict.txt (word freq tag per line, MIT licensed)
  --st-chars     OpenCC STCharacters.txt
  --tw-variants  OpenCC TWVariants.txt

Outputs:
  data/lexicon/zh_common.txt          most frequent multi-character CJK words
  data/samples/traditional_1000.txt   1,000 Taiwan-style Traditional sentences
"""
import argparse
import random


def is_cjk(c):
    o = ord(c)
    return 0x4E00 <= o <= 0x9FFF or 0x3400 <= o <= 0x4DBF or 0xF900 <= o <= 0xFAFF


def load_map(path):
    m = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if len(parts) == 2:
                m[parts[0]] = parts[1].split(" ")[0]
    return m


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--jieba-dict", required=True)
    ap.add_argument("--st-chars", required=True)
    ap.add_argument("--tw-variants", required=True)
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--lexicon-size", type=int, default=40000)
    args = ap.parse_args()

    words = []
    with open(args.jieba_dict, encoding="utf-8") as f:
        for line in f:
            w, freq, _ = line.split(" ")
            if len(w) >= 2 and all(is_cjk(c) for c in w):
                words.append((int(freq), w))
    words.sort(key=lambda x: (-x[0], x[1]))
    top = words[: args.lexicon_size]

    with open(f"{args.out_dir}/lexicon/zh_common.txt", "w", encoding="utf-8") as f:
        f.write("# Most frequent multi-character words from jieba's dict.txt (MIT).\n")
        for _, w in top:
            f.write(w + "\n")

    st = load_map(args.st_chars)
    tw = load_map(args.tw_variants)

    def to_trad(s):
        return "".join(tw.get(st.get(c, c), st.get(c, c)) for c in s)

    # Frequency-weighted sampling over all words, including single characters,
    # so the character distribution resembles running text.
    pool = []
    with open(args.jieba_dict, encoding="utf-8") as f:
        for line in f:
            w, freq, _ = line.split(" ")
            if all(is_cjk(c) for c in w):
                pool.append((w, int(freq)))
    pool.sort(key=lambda x: -x[1])
    pool = pool[:60000]
    vocab = [w for w, _ in pool]
    weights = [fr for _, fr in pool]

    rng = random.Random(20191029)
    punct = ["，", "、", "；"]
    with open(f"{args.out_dir}/samples/traditional_1000.txt", "w", encoding="utf-8") as f:
        for _ in range(1000):
            clauses = []
            for _ in range(rng.randint(1, 3)):
                n = rng.randint(4, 10)
                clauses.append("".join(rng.choices(vocab, weights=weights, k=n)))
            sent = rng.choice(punct).join(clauses) + "。"
            f.write(to_trad(sent) + "\n")


if __name__ == "__main__":
    main()
