"""Shared synthetic data for the harness, social and acceptance tests."""
import random

from phytonlp.builder import Chunk, LabelSet

BIO = ["puceron", "pyrale", "altise"]
DIS = ["mildiou", "rouille", "septoriose"]
BACKGROUND = "parcelle stade végétation observation semaine pluie culture feuilles tiges levée floraison récolte semis variété secteur".split()


def separable_examples(n_docs=200, per_doc=20, seed=0):
    """Chunks whose labels are exactly the presence of planted hazard words."""
    rng = random.Random(seed)
    out = []
    for d in range(n_docs):
        bio, dis = rng.random() < 0.5, rng.random() < 0.5
        for k in range(per_doc):
            words = rng.choices(BACKGROUND, k=rng.randint(10, 30))
            if bio:
                words += rng.choices(BIO, k=3)
            if dis:
                words += rng.choices(DIS, k=3)
            rng.shuffle(words)
            out.append(Chunk(f"d{d:03d}#{k:04d}", f"d{d:03d}", " ".join(words), len(words), LabelSet(bio, dis)))
    return out
