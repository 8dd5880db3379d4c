"""Сборка сетей из чекпойнтов и чекпойнтов из сетей"""

from nets.models import (
    CoupledNetworkPair,
    Encoder,
    GaussianPolicy,
    MixingWeights,
    MlpSpec,
    ValueNet,
    VariationalDecoder,
)

from .exceptions import CheckpointDimError, CheckpointGroupError
from .models import Checkpoint


def _spec(payload):
    return MlpSpec(**payload)


def solo_checkpoint(env_spec, policy, value, metadata):
    return Checkpoint(
        env_id=env_spec.id,
        dims=env_spec.dims,
        architecture={"policy": policy.spec.to_dict(), "value": value.spec.to_dict()},
        groups={
            "policy": policy.group.values(),
            "log_std": policy.log_std_group.values(),
            "value": value.group.values(),
        },
        metadata=dict(metadata),
    )


def coupled_checkpoint(env_spec, pair, decoder, metadata):
    checkpoint = solo_checkpoint(env_spec, pair.policy, pair.value, metadata)
    checkpoint.architecture.update(
        encoder=pair.encoder.spec.to_dict(),
        decoder=decoder.spec.to_dict(),
        mixing={
            "policy_layers": len(pair.mixing.policy_params),
            "value_layers": len(pair.mixing.value_params),
        },
    )
    checkpoint.groups.update(
        encoder=pair.encoder.group.values(),
        decoder=decoder.group.values(),
        mixing=pair.mixing.group.values(),
    )
    return checkpoint


def restore_solo(checkpoint, prefix=""):
    """(policy, value) с весами из чекпойнта; prefix="teacher_" для учителя"""
    policy = GaussianPolicy(
        _spec(checkpoint.architecture["policy"]), name=f"{prefix}policy"
    )
    value = ValueNet(_spec(checkpoint.architecture["value"]), name=f"{prefix}value")
    policy.group.load(checkpoint.groups["policy"])
    policy.log_std_group.load(checkpoint.groups["log_std"])
    value.group.load(checkpoint.groups["value"])
    return policy, value


def load_teacher(checkpoint):
    """Учитель: политика и ценность, замороженные после загрузки"""
    policy, value = restore_solo(checkpoint, prefix="teacher_")
    policy.freeze()
    value.freeze()
    return policy, value


def check_env_dims(checkpoint, env_spec):
    if tuple(checkpoint.dims) != env_spec.dims:
        raise CheckpointDimError(
            f"Чекпойнт для размерностей {list(checkpoint.dims)}, "
            f"среда {env_spec.id} имеет {list(env_spec.dims)}"
        )


def restore_coupled(checkpoint, teacher_checkpoint):
    """(CoupledNetworkPair, VariationalDecoder) из чекпойнта MIKT и учителя"""
    if not checkpoint.is_coupled:
        raise CheckpointGroupError("Чекпойнт не содержит энкодера и весов смешивания")
    teacher_policy, teacher_value = load_teacher(teacher_checkpoint)
    policy, value = restore_solo(checkpoint)
    architecture = checkpoint.architecture
    encoder = Encoder(_spec(architecture["encoder"]))
    encoder.group.load(checkpoint.groups["encoder"])
    decoder = VariationalDecoder(_spec(architecture["decoder"]))
    decoder.group.load(checkpoint.groups["decoder"])
    mixing = MixingWeights(
        architecture["mixing"]["policy_layers"], architecture["mixing"]["value_layers"]
    )
    mixing.group.load(checkpoint.groups["mixing"])
    pair = CoupledNetworkPair(teacher_policy, teacher_value, policy, value, encoder, mixing)
    return pair, decoder
