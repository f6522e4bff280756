"""Write a synthetic input tree (OCR and XML bulletins, tags, thesaurus, tweets, risk sentences)."""
import argparse
import json

from phytonlp.synthetic import write_synthetic_inputs


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("directory")
    p.add_argument("--n-docs", type=int, default=500)
    p.add_argument("--n-xml", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    paths = write_synthetic_inputs(args.directory, args.n_docs, args.seed, args.n_xml)
    print(json.dumps(paths, indent=2))


if __name__ == "__main__":
    main()
