#!/usr/bin/env python3
"""Build the MNIST {1,7} IDX fixture in data/mnist17/.

Source: the 5000-image MNIST subset shipped inside the mlxtend wheel
(mlxtend/data/data/mnist_5k.csv.gz, 784 pixel columns then the label).

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist17.py /tmp/mlx/mlxtend-*.whl
"""
import argparse
import gzip
import io
import pathlib
import struct
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist17"))
    ap.add_argument("--digits", default="1,7")
    args = ap.parse_args()
    keep = {int(d) for d in args.digits.split(",")}

    with zipfile.ZipFile(args.wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER)).decode()

    images, labels = bytearray(), bytearray()
    count = 0
    for line in io.StringIO(raw):
        line = line.strip()
        if not line:
            continue
        cells = [int(float(c)) for c in line.split(",")]
        if len(cells) != 785:
            raise SystemExit(f"unexpected row width {len(cells)}")
        label = cells[-1]
        if label not in keep:
            continue
        images.extend(bytes(cells[:-1]))
        labels.append(label)
        count += 1

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, count, 28, 28) + images)
    (out / "labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, count) + labels)
    print(f"wrote {count} samples to {out}")


if __name__ == "__main__":
    main()
