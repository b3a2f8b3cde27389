"""
Where dictionary lookup goes wrong
==================================

Spoken text for training is made by replacing character text with
dictionary pronunciations, longest entry first.  That is usually right,
but not always.
"""

from hanzipron.pinyinizer import PronDictionary, pinyinize

d = PronDictionary([("想睡", ["xiang3", "shui4"]), ("睡觉", ["shui4", "jiao4"]),
                    ("觉", ["jue2"]), ("觉得", ["jue2", "de5"])])

for text in ("睡觉", "觉得", "想睡觉"):
    print(text, "->", pinyinize(text, d).to_text(strip_tones=True).strip())

# 想睡 grabs the middle character before 睡觉 gets a chance, so the last
# character falls back to its standalone reading.
res = pinyinize(["我想睡觉", "觉得"], d)
print(res.to_text().strip().replace("\n", " | "))
print(f"coverage {res.coverage:.2f}: characters without any entry are dropped")
