"""Train a tiny two-symbol model on screen-oriented ink and serve it.

The synthetic glyph inventory uses a y-up frame; browser canvases are
y-down. Flipping y inside the writing area before training gives the
served model the same orientation the pad produces.
"""

import argparse

import uvicorn

from inkrec.data import Dataset, LabeledInk, synth_dataset
from inkrec.decoder import DecoderWeights, FeatureFunctionSet
from inkrec.experiments import evaluate_bundle, train_system
from inkrec.ink import Ink, Stroke
from inkrec.net import TrainConfig
from inkrec.recognizer import RecognizerBundle
from inkrec.service import create_app


def flip_y(item: LabeledInk) -> LabeledInk:
    area = item.ink.writing_area
    mirror = 2.0 * area.y + area.h
    strokes = []
    for s in item.ink.strokes:
        xyt = s.xyt.copy()
        xyt[:, 1] = mirror - xyt[:, 1]
        strokes.append(Stroke(xyt, s.pen_down))
    return LabeledInk(Ink(tuple(strokes), area), item.transcription, item.writer)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--port", type=int, default=8077)
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args()

    base = synth_dataset(
        2,
        {"train": 240, "tune": 40, "validation": 0, "test": 80},
        seed=0,
        word_symbols=(1, 1),
    )
    ds = Dataset(
        **{name: tuple(flip_y(it) for it in items) for name, items in base.splits().items()}
    )
    config = TrainConfig(
        batch_size=8,
        learning_rate=1e-3,
        dropout_rate=0.0,
        patience=18,
        eval_every=50,
        max_steps=900,
        seed=0,
    )
    trained = train_system(ds, input_mode="curves", layers=1, nodes=24, config=config)
    bundle = RecognizerBundle(
        model=trained.model,
        features=FeatureFunctionSet(),
        weights=DecoderWeights(beam_width=16),
        input_mode="curves",
    )
    report = evaluate_bundle(bundle, ds.test)
    print(f"serving {''.join(trained.model.chars)} model, test CER {report.cer:.2f}%", flush=True)
    uvicorn.run(create_app(bundle), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
