import argparse

from app.commands.shared import add_training_arguments, run_config_from
from app.exceptions import ArgumentError
from app.models.factor_model import SvdCfModel
from app.services import eval_service, ratings_service
from app.services.persistence_service import model_store
from app.services.training_service import TrainingService, schema_for, seed_of


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train", help="train a model from a ratings CSV")
    add_training_arguments(parser)
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    config = run_config_from(args)
    if not config.input:
        raise ArgumentError("--input is required")
    output = config.output or "model.json"
    schema = schema_for(config)
    service = TrainingService(config)
    ds = ratings_service.read_csv(config.input, schema)

    train_ds, test_ds = ds, None
    if config.holdout:
        train_ds, test_ds = ratings_service.split(ds, config.holdout, seed_of(config))

    predictor, result = service.train(train_ds)
    model_store(output, ds.kind).save(predictor)

    print(
        f"trained {service.algorithm.value} on {len(train_ds)} ratings "
        f"({train_ds.n_users} users, {train_ds.n_items} items)"
    )
    model = getattr(predictor, "model", None)
    if isinstance(model, SvdCfModel):
        print(f"rank f = {model.f}")
    if result is not None and result.rmse_trace:
        print(f"training rmse = {result.rmse_trace[-1]:.6f}")
    if result is not None and result.loss_trace:
        print(f"final loss = {result.loss_trace[-1]:.6f}")
    if test_ds is not None and len(test_ds):
        report = eval_service.evaluate_predictor(predictor, test_ds, ks=())
        print(f"held-out rmse = {report.rmse:.6f} over {report.pairs} ratings")
    print(f"model written to {output}")
    return 0
