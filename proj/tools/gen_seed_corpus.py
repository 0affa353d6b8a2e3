#!/usr/bin/env python3
"""Regenerates data/seed_corpus.jsonl from the hand-written gold table below.

Each row lists the gold surfaces; offsets are located here so nobody has to
count Unicode scalars by hand. Zero-width units sit at the strength's end.
"""
import json
import sys

MON_FRI = "«TH:mon-fri»"
SACHET = "«TH:sachet»"

# id, split, text, medication, strength, unit (value, explicit?), mode, instructions
ROWS = [
    ("a01", "train", "Xarator (40) 1/2x1 opc", "Xarator", "40", ("mg", False), "opc", "1/2x1 opc"),
    ("a02", "train", "Douzabox 1x2 opc", "Douzabox", None, None, "opc", "1x2 opc"),
    ("a03", "train", "omeprazole (20) 1x1 po ac", "omeprazole", "20", ("mg", False), "po", "1x1 po ac"),
    ("a04", "train", f"Thyrosit (50) 0.5x1 o ac {MON_FRI}", "Thyrosit", "50", ("mcg", False), "o", f"0.5x1 o ac {MON_FRI}"),
    ("a05", "train", "Mevalotin Pretect (40) 1x1 o pc", "Mevalotin Pretect", "40", ("mg", False), "o", "1x1 o pc"),
    ("a06", "train", "Ridperidone (1) 0.5x1 po hs", "Ridperidone", "1", ("mg", False), "po", "0.5x1 po hs"),
    ("a07", "train", "Cotrimazole 2 tab po od", "Cotrimazole", None, None, "po", "2 tab po od"),
    ("a08", "train", "Trazodone (50) 1x1 po hs", "Trazodone", "50", ("mg", False), "po", "1x1 po hs"),
    ("a09", "train", "LoRANTA (100) 1x1", "LoRANTA", "100", ("mg", False), None, "1x1"),
    ("a10", "train", "Nuelin SR (200) 1x2", "Nuelin SR", "200", ("mg", False), None, "1x2"),
    ("b01", "validation", "Amlodipine (10) 1x1 opc", "Amlodipine", "10", ("mg", False), "opc", "1x1 opc"),
    ("b02", "validation", "ORS", "ORS", None, None, None, None),
    ("b03", "validation", "paracet (500) 1 tab po prn q 4-6 hr", "paracet", "500", ("mg", False), "po", "1 tab po prn q 4-6 hr"),
    ("b04", "validation", "Ramipril (2.5) 0.5x1 po hs", "Ramipril", "2.5", ("mg", False), "po", "0.5x1 po hs"),
    ("b05", "validation", "VitD2 (20000) 1 tab po weekly", "VitD2", "20000", None, "po", "1 tab po weekly"),
    ("b06", "validation", "Omeprazole (20) 1x1 oac", "Omeprazole", "20", ("mg", False), "oac", "1x1 oac"),
    ("b07", "validation", "Filgrastim 300 sc od start day 3-12", "Filgrastim", "300", ("mcg", False), "sc", "sc od start day 3-12"),
    ("b08", "validation", "Hidil Cap(300) 1x1", "Hidil Cap", "300", ("mg", False), None, "1x1"),
    ("b09", "validation", "Eucor Tab(20) 1x1", "Eucor Tab", "20", ("mg", False), None, "1x1"),
    ("b10", "validation", "Keflex(500) 1x4 opc", "Keflex", "500", ("mg", False), "opc", "1x4 opc"),
    ("b11", "validation", "Rosuvastatin 20 1 x 1 po hs", "Rosuvastatin", "20", ("mg", False), "po", "1 x 1 po hs"),
    ("b12", "validation", "Norfloxacin (400) 1x2 po ac", "Norfloxacin", "400", ("mg", False), "po", "1x2 po ac"),
    ("b13", "validation", "Lorazepam (0.5) 1 tab po prn hs", "Lorazepam", "0.5", ("mg", False), "po", "1 tab po prn hs"),
    ("b14", "validation", "Senokot 2 tabs po prn constipation hs", "Senokot", None, None, "po", "2 tabs po prn constipation hs"),
    ("b15", "validation", "Ferli-6 1 tab po bid pc", "Ferli-6", None, None, "po", "1 tab po bid pc"),
    ("b16", "validation", "Senokot 2 tab po hs", "Senokot", None, None, "po", "2 tab po hs"),
    ("b17", "validation", "Vit B co 1*3 po pc", "Vit B co", None, None, "po", "1*3 po pc"),
    ("b18", "validation", "PROgraf Cap(1 ) 2*2 po pc", "PROgraf Cap", "1", ("mg", False), "po", "2*2 po pc"),
    ("b19", "validation", "Ursolin (250) 1*3 po pc", "Ursolin", "250", ("mg", False), "po", "1*3 po pc"),
    ("b20", "validation", "Paracetamol (500) 1 tab po prn q 4-6 hr", "Paracetamol", "500", ("mg", False), "po", "1 tab po prn q 4-6 hr"),
    ("b21", "validation", f"Mucotic(600) 1 {SACHET} opc", "Mucotic", "600", ("mg", False), "opc", f"1 {SACHET} opc"),
    ("b22", "validation", "Clopidogrel(75) 1*1 po pc", "Clopidogrel", "75", ("mg", False), "po", "1*1 po pc"),
    ("b23", "validation", "Mydocalm 1x3 po pc", "Mydocalm", None, None, "po", "1x3 po pc"),
    ("b24", "validation", "Bisoprolol(2.5) 1/2x1 po pc", "Bisoprolol", "2.5", ("mg", False), "po", "1/2x1 po pc"),
    ("b25", "validation", "Omeprazole(20) 1x1 po ac", "Omeprazole", "20", ("mg", False), "po", "1x1 po ac"),
    ("p01", "unassigned", "Simvas(40) 1x1 po pc for 3 mos.", "Simvas", "40", ("mg", False), "po", "1x1 po pc for 3 mos."),
    ("p02", "unassigned", "ASA 100 qPM", "ASA", "100", ("mg", False), None, "qPM"),
    ("p03", "unassigned", "ASA 100", "ASA", "100", ("mg", False), None, None),
    ("p04", "unassigned", "ASA (500)", "ASA", "500", ("mg", False), None, None),
    ("p05", "unassigned", "Paracetamol (500) po q 4-6 hr", "Paracetamol", "500", ("mg", False), "po", "po q 4-6 hr"),
]

# Expansion gold. a01-a05 follow the worked examples shown to the model in
# the EX few-shot prompt (two errata fixed: a01 quantity, a04 ingredient).
EX = {
    "a01": {"active_ingredients": ["Simvastatin"], "unit": "milligram", "mode": "Oral",
            "quantity_of_dose_form": "1/2", "dose_form": "Tablet", "relation_to_meal": "after meal",
            "frequency": "Once daily"},
    "a02": {"active_ingredients": ["Douzabox"], "mode": "Oral", "quantity_of_dose_form": "1",
            "dose_form": "Tablet", "relation_to_meal": "after meal", "frequency": "Twice daily"},
    "a03": {"active_ingredients": ["Omeprazole"], "unit": "milligram", "mode": "Oral",
            "quantity_of_dose_form": "1", "dose_form": "Tablet", "relation_to_meal": "before meal",
            "frequency": "Once daily"},
    "a04": {"active_ingredients": ["levothyroxine"], "unit": "microgram", "mode": "Oral",
            "quantity_of_dose_form": "0.5", "dose_form": "Tablet", "relation_to_meal": "before meal",
            "frequency": "Once daily", "other": MON_FRI},
    "a05": {"active_ingredients": ["Pravastatin"], "unit": "milligram", "mode": "Oral",
            "quantity_of_dose_form": "1", "dose_form": "Tablet", "relation_to_meal": "after meal",
            "frequency": "Once daily"},
    "p01": {"active_ingredients": ["simvastatin"], "unit": "milligram", "mode": "oral",
            "quantity_of_dose_form": "1", "dose_form": "tablet", "relation_to_meal": "after a meal",
            "frequency": "once daily", "other": "for three months"},
}

EX_KEYS = ["active_ingredients", "unit", "mode", "quantity_of_dose_form", "dose_form",
           "relation_to_meal", "frequency", "other"]


def find_token(text, surface, start=0):
    i = text.find(surface, start)
    if i < 0:
        sys.exit(f"{surface!r} not in {text!r}")
    return i


def ann(kind, text, surface, start=0):
    i = find_token(text, surface, start)
    return {"type": kind, "start": i, "end": i + len(surface), "text": surface, "zero_width": False}


def build(row):
    sid, split, text, med, strength, unit, mode, instr = row
    ner = [ann("Medication", text, med)]
    cursor = ner[0]["end"]
    if strength:
        s = ann("Strength", text, strength, cursor)
        ner.append(s)
        cursor = s["end"]
        if unit:
            value, explicit = unit
            if explicit:
                ner.append(ann("Unit", text, value, cursor))
            else:
                ner.append({"type": "Unit", "start": s["end"], "end": s["end"], "text": "",
                            "zero_width": True, "inferred": value})
    instr_ann = ann("Instructions", text, instr, cursor) if instr else None
    if mode:
        ner.append(ann("Mode", text, mode, instr_ann["start"] if instr_ann else cursor))
    if instr_ann:
        ner.append(instr_ann)
    out = {"id": sid, "split": split, "text": text, "ner": ner}
    if sid in EX:
        out["ex"] = {k: EX[sid][k] for k in EX_KEYS if k in EX[sid]}
    return out


def main():
    path = sys.argv[1] if len(sys.argv) > 1 else "data/seed_corpus.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in ROWS:
            f.write(json.dumps(build(row), ensure_ascii=False, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
