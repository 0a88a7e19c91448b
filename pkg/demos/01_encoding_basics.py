"""Harmonization and one-hot encoding basics.

Two surveys rarely share category vocabularies: one reports income as
dollar-bracket strings, the other as numeric codes.  A harmonization
spec maps both onto one shared set of categories, and encoding turns
each harmonized sample into a fixed-width bit-vector where a missing
answer is simply an all-zero group.
"""

import numpy as np

from surveyfuse import build_dictionary, encode_value, harmonize_target, load_default_spec

spec = load_default_spec()
dictionary = build_dictionary(spec)

print("harmonized features and their category counts:")
for name, cats in zip(dictionary.features, dictionary.categories):
    print(f"  {name:12s} {len(cats)} categories: {', '.join(cats)}")
print(f"total one-hot columns d = {dictionary.dimension}")
print()

# The same conceptual answer arrives in survey-specific clothing.
income = spec.features[0]
print("encoding the income feature from two different surveys:")
print("  psrc '$100,000 or more'   ->", encode_value(income, "$100,000 or more", "psrc2017"))
print("  nhts code '08' (100-125k) ->", encode_value(income, "08", "nhts2017"))
print()

# Missing answers become all-zero groups instead of a separate column.
print("missing income (blank)      ->", encode_value(income, "", "psrc2017"))
print("nhts refused code '-7'      ->", encode_value(income, "-7", "nhts2017"))
print()

# Numeric columns are binned with inclusive lower bounds.
age = spec.features[1]
for raw in ["24", "25", "64", "65"]:
    print(f"nhts age {raw:>3s} -> {encode_value(age, raw, 'nhts2017')}")
print()

# Targets are rescaled to deliveries/day so surveys become comparable:
# a monthly count of 30 is one delivery per day.
print("30 deliveries/month -> deliveries/day:", harmonize_target(30, 30))
print("missing target propagates:            ", harmonize_target(None, 30))

# Bit positions are stable across datasets encoded with the same
# dictionary, which is what makes cross-survey matching meaningful.
cols = dictionary.columns
print()
print("first six bit positions:", [f"{f}={c}" for f, c in cols[:6]])
