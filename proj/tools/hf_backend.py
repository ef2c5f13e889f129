#!/usr/bin/env python3
"""Transformer worker for the synsel transformer backend.

Records are line-delimited JSON with "tokens" (already laid out with [CLS],
[SEP] and [MASK] markers), "segments" and, for training, "label".

    hf_backend.py train --config C --train T --heldout H --out DIR
    hf_backend.py predict --model DIR --input I --out O
"""

import argparse
import json
import math
import random
from pathlib import Path

import torch
from transformers import (AutoModelForSequenceClassification, AutoTokenizer,
                          get_linear_schedule_with_warmup)

SPECIAL = {"[CLS]": "cls_token", "[SEP]": "sep_token", "[MASK]": "mask_token"}


def read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def encode(tokenizer, record, max_len):
    """Word pieces for each token; the last content segment gets type id 1."""
    last = max(record["segments"])
    ids, types = [], []
    for tok, seg in zip(record["tokens"], record["segments"]):
        if tok in SPECIAL:
            pieces = [getattr(tokenizer, SPECIAL[tok] + "_id")]
        else:
            pieces = tokenizer.convert_tokens_to_ids(tokenizer.tokenize(tok))
        ids.extend(pieces)
        types.extend([1 if seg == last and last > 0 else 0] * len(pieces))
    if len(ids) > max_len:
        # Keep the tail: it holds the question and the final [SEP].
        ids = ids[:1] + ids[len(ids) - max_len + 1:]
        types = types[:1] + types[len(types) - max_len + 1:]
    return ids, types


def collate(tokenizer, batch):
    width = max(len(ids) for ids, _ in batch)
    pad = tokenizer.pad_token_id or 0
    input_ids = torch.full((len(batch), width), pad, dtype=torch.long)
    token_types = torch.zeros((len(batch), width), dtype=torch.long)
    mask = torch.zeros((len(batch), width), dtype=torch.long)
    for i, (ids, types) in enumerate(batch):
        input_ids[i, :len(ids)] = torch.tensor(ids)
        token_types[i, :len(types)] = torch.tensor(types)
        mask[i, :len(ids)] = 1
    return {"input_ids": input_ids, "token_type_ids": token_types, "attention_mask": mask}


def predict_probs(model, tokenizer, encoded, batch_size):
    model.eval()
    out = []
    with torch.no_grad():
        for b in range(0, len(encoded), batch_size):
            logits = model(**collate(tokenizer, encoded[b:b + batch_size])).logits
            out.extend(torch.softmax(logits, dim=-1).tolist())
    return out


def accuracy(model, tokenizer, encoded, labels, batch_size):
    if not encoded:
        return 0.0
    probs = predict_probs(model, tokenizer, encoded, batch_size)
    hits = sum(int(p[1] > p[0]) == y for p, y in zip(probs, labels))
    return hits / len(labels)


def train(args):
    cfg = json.loads(Path(args.config).read_text())
    random.seed(cfg["seed"])
    torch.manual_seed(cfg["seed"])
    tokenizer = AutoTokenizer.from_pretrained(cfg["pretrained_model"])
    model = AutoModelForSequenceClassification.from_pretrained(cfg["pretrained_model"], num_labels=2)
    max_len = cfg["max_sequence_length"]

    train_recs, held_recs = read_jsonl(args.train), read_jsonl(args.heldout)
    data = [(encode(tokenizer, r, max_len), r["label"]) for r in train_recs]
    held = [encode(tokenizer, r, max_len) for r in held_recs]
    held_labels = [r["label"] for r in held_recs]

    batch = cfg["batch_size"]
    steps = cfg["epochs"] * math.ceil(len(data) / batch)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg["learning_rate"])
    schedule = get_linear_schedule_with_warmup(optimizer, int(cfg["warmup_ratio"] * steps), steps)

    report = {"epoch_loss": [], "heldout_accuracy": [], "steps": steps,
              "train_size": len(data), "heldout_size": len(held)}
    for epoch in range(cfg["epochs"]):
        model.train()
        random.shuffle(data)
        total = 0.0
        for b in range(0, len(data), batch):
            chunk = data[b:b + batch]
            inputs = collate(tokenizer, [x for x, _ in chunk])
            labels = torch.tensor([y for _, y in chunk])
            loss = model(**inputs, labels=labels).loss
            if epoch == 0 and b == 0:
                report["initial_loss"] = loss.item()
            loss.backward()
            optimizer.step()
            schedule.step()
            optimizer.zero_grad()
            total += loss.item() * len(chunk)
        report["epoch_loss"].append(total / max(1, len(data)))
        report["heldout_accuracy"].append(accuracy(model, tokenizer, held, held_labels, batch))
        print(f"epoch {epoch + 1}: loss {report['epoch_loss'][-1]:.4f} "
              f"heldout {report['heldout_accuracy'][-1]:.3f}", flush=True)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save_pretrained(out)
    tokenizer.save_pretrained(out)
    (out / "synsel_config.json").write_text(json.dumps(cfg, indent=2))
    (out / "report.json").write_text(json.dumps(report, indent=2))


def predict(args):
    model_dir = Path(args.model)
    cfg = json.loads((model_dir / "synsel_config.json").read_text())
    tokenizer = AutoTokenizer.from_pretrained(model_dir)
    model = AutoModelForSequenceClassification.from_pretrained(model_dir)
    encoded = [encode(tokenizer, r, cfg["max_sequence_length"]) for r in read_jsonl(args.input)]
    with open(args.out, "w", encoding="utf-8") as f:
        for p in predict_probs(model, tokenizer, encoded, cfg["batch_size"]):
            f.write(json.dumps(p) + "\n")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train")
    t.add_argument("--config", required=True)
    t.add_argument("--train", required=True)
    t.add_argument("--heldout", required=True)
    t.add_argument("--out", required=True)
    p = sub.add_parser("predict")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    args = parser.parse_args()
    train(args) if args.command == "train" else predict(args)


if __name__ == "__main__":
    main()
