"""Model core: LSTM layers, attention, gated user memory, decoder wiring.

The full network reads a blog token sequence X, a user profile vector F,
and a user description token sequence D, and decodes a comment:

* X goes through a stacked bidirectional LSTM encoder.
* F maps to a dense user vector v_u; D goes through its own (smaller)
  bidirectional LSTM encoder.
* The decoder is a stacked unidirectional LSTM.  Per step it attends over
  the blog states and (co-attention) the description states, consults a
  multiplicatively decaying user memory initialized from v_u, and emits a
  distribution either straight from its state or through an output head
  that mixes in a user representation derived from v_u and the
  description context.

Four flags select which pieces exist; every baseline in the ablation is a
flag subset of the full model (see :data:`PRESETS`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "Variant",
    "PRESETS",
    "variant_from_name",
    "ModelConfig",
    "LSTMCell",
    "AttentionResult",
    "DecoderState",
    "StepResult",
    "ModelParams",
    "param_spec",
    "build_model",
    "lstm_step",
    "bilstm_encode",
    "user_embed",
    "attention_context",
    "gated_memory_step",
    "embed_sequence",
    "encode_blog",
    "encode_description",
    "user_vector",
    "init_decoder_state",
    "decoder_step",
    "GATE_BLOCKS",
]

# Row-block order inside every packed LSTM parameter: input, forget,
# candidate, output gates, each a hidden-size slab.
GATE_BLOCKS = ("input", "forget", "candidate", "output")


@dataclass(frozen=True)
class Variant:
    """Which optional user-conditioning pieces the model carries."""

    use_user_embedding: bool = False
    use_gated_memory: bool = False
    use_coattention: bool = False
    use_external: bool = False

    def __post_init__(self):
        if self.use_external and not self.use_coattention:
            raise ValueError("use_external requires use_coattention (the output head reads the description context)")

    @property
    def needs_user_vector(self) -> bool:
        return self.use_user_embedding or self.use_gated_memory or self.use_external

    @property
    def needs_description(self) -> bool:
        return self.use_coattention

    def flags(self) -> dict[str, bool]:
        return {
            "use_user_embedding": self.use_user_embedding,
            "use_gated_memory": self.use_gated_memory,
            "use_coattention": self.use_coattention,
            "use_external": self.use_external,
        }


PRESETS: dict[str, Variant] = {
    "Seq2Seq": Variant(),
    "Seq2Seq+Emb": Variant(use_user_embedding=True),
    "+Mem": Variant(use_gated_memory=True),
    "+CoAtt": Variant(use_gated_memory=True, use_coattention=True),
    "+External": Variant(use_gated_memory=True, use_coattention=True, use_external=True),
    "PCGN": Variant(use_gated_memory=True, use_coattention=True, use_external=True),
    # Same network as PCGN; the difference is data-side (descriptions are
    # augmented with the author's frequent comment words during prepare).
    "PCGN+ComWord": Variant(use_gated_memory=True, use_coattention=True, use_external=True),
}


def variant_from_name(name: str) -> Variant:
    if name not in PRESETS:
        raise ValueError(f"unknown variant {name!r}; expected one of {sorted(PRESETS)}")
    return PRESETS[name]


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions, variant flags, and reserved token ids.

    ``unk_id``/``pad_id`` may be None for toy vocabularies; ``bos_id`` and
    ``eos_id`` are always required.  Decoder depth and width follow the
    blog encoder.
    """

    vocab_size: int
    feature_dim: int
    variant: Variant = field(default_factory=Variant)
    embed_dim: int = 300
    blog_hidden: int = 512
    blog_layers: int = 2
    desc_hidden: int = 200
    desc_layers: int = 1
    user_dim: int = 100
    pad_id: int | None = 0
    unk_id: int | None = 1
    bos_id: int = 2
    eos_id: int = 3

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "blog_hidden", "blog_layers",
                     "desc_hidden", "desc_layers", "user_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.feature_dim < 1 and self.variant.needs_user_vector:
            raise ValueError("feature_dim must be positive when the variant reads user features")
        for name in ("pad_id", "unk_id", "bos_id", "eos_id"):
            val = getattr(self, name)
            if val is not None and not (0 <= val < self.vocab_size):
                raise ValueError(f"{name}={val} out of range for vocab_size={self.vocab_size}")

    @classmethod
    def paper(cls, vocab_size: int, feature_dim: int, variant: Variant = PRESETS["PCGN"], **over) -> "ModelConfig":
        """Full-scale dimensions (40k vocab caps apply upstream)."""
        base = dict(embed_dim=300, blog_hidden=512, blog_layers=2,
                    desc_hidden=200, desc_layers=1, user_dim=100)
        base.update(over)
        return cls(vocab_size=vocab_size, feature_dim=feature_dim, variant=variant, **base)

    @classmethod
    def desk(cls, vocab_size: int, feature_dim: int, variant: Variant = PRESETS["PCGN"], **over) -> "ModelConfig":
        """Laptop-scale dimensions for tests and the synthetic corpus."""
        base = dict(embed_dim=16, blog_hidden=32, blog_layers=1,
                    desc_hidden=16, desc_layers=1, user_dim=8)
        base.update(over)
        return cls(vocab_size=vocab_size, feature_dim=feature_dim, variant=variant, **base)

    @property
    def decoder_hidden(self) -> int:
        return self.blog_hidden

    @property
    def decoder_layers(self) -> int:
        return self.blog_layers

    @property
    def decoder_input_dim(self) -> int:
        v = self.variant
        dim = 2 * self.blog_hidden + self.embed_dim
        if v.use_coattention:
            dim += 2 * self.desc_hidden
        if v.use_user_embedding:
            dim += self.user_dim
        if v.use_gated_memory:
            dim += self.user_dim
        return dim

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "feature_dim": self.feature_dim,
            "variant": self.variant.flags(),
            "embed_dim": self.embed_dim,
            "blog_hidden": self.blog_hidden,
            "blog_layers": self.blog_layers,
            "desc_hidden": self.desc_hidden,
            "desc_layers": self.desc_layers,
            "user_dim": self.user_dim,
            "pad_id": self.pad_id,
            "unk_id": self.unk_id,
            "bos_id": self.bos_id,
            "eos_id": self.eos_id,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["variant"] = Variant(**obj["variant"])
        return cls(**obj)


@dataclass
class LSTMCell:
    """Packed single-cell parameters; rows follow GATE_BLOCKS."""

    w_x: Tensor  # (4H, in_dim)
    w_h: Tensor  # (4H, H)
    b: Tensor    # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]


@dataclass
class Affine:
    w: Tensor
    b: Tensor


@dataclass
class StateInit:
    """Projections producing one decoder layer's initial (h, c)."""

    h: Affine
    c: Affine


@dataclass(frozen=True)
class AttentionResult:
    context: Tensor
    weights: Tensor


@dataclass(frozen=True)
class DecoderState:
    """Per-layer (h, c) pairs plus the user memory cell and step count."""

    layers: tuple[tuple[Tensor, Tensor], ...]
    memory: Tensor | None
    step: int = 0

    @property
    def top_h(self) -> Tensor:
        return self.layers[-1][0]


@dataclass(frozen=True)
class StepResult:
    logits: Tensor
    state: DecoderState
    blog_attention: Tensor
    desc_attention: Tensor | None


def param_spec(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Canonical (name, shape) list; also the allocation/serialization order."""
    v = config.variant
    spec: list[tuple[str, tuple[int, ...]]] = []
    spec.append(("embedding", (config.vocab_size, config.embed_dim)))

    def cell(prefix: str, in_dim: int, hidden: int):
        spec.append((f"{prefix}.w_x", (4 * hidden, in_dim)))
        spec.append((f"{prefix}.w_h", (4 * hidden, hidden)))
        spec.append((f"{prefix}.b", (4 * hidden,)))

    in_dim = config.embed_dim
    for layer in range(config.blog_layers):
        cell(f"blog_enc.l{layer}.fwd", in_dim, config.blog_hidden)
        cell(f"blog_enc.l{layer}.bwd", in_dim, config.blog_hidden)
        in_dim = 2 * config.blog_hidden

    if v.needs_description:
        in_dim = config.embed_dim
        for layer in range(config.desc_layers):
            cell(f"desc_enc.l{layer}.fwd", in_dim, config.desc_hidden)
            cell(f"desc_enc.l{layer}.bwd", in_dim, config.desc_hidden)
            in_dim = 2 * config.desc_hidden

    if v.needs_user_vector:
        spec.append(("user_proj.w", (config.user_dim, config.feature_dim)))
        spec.append(("user_proj.b", (config.user_dim,)))

    spec.append(("attn_blog", (config.decoder_hidden, 2 * config.blog_hidden)))
    if v.use_coattention:
        spec.append(("attn_desc", (config.decoder_hidden, 2 * config.desc_hidden)))

    if v.use_gated_memory:
        spec.append(("mem_update", (config.user_dim, config.decoder_hidden)))
        gate_in = config.decoder_hidden + config.embed_dim + 2 * config.blog_hidden
        spec.append(("mem_output", (config.user_dim, gate_in)))

    in_dim = config.decoder_input_dim
    for layer in range(config.decoder_layers):
        cell(f"dec.l{layer}", in_dim, config.decoder_hidden)
        in_dim = config.decoder_hidden

    summary = 2 * config.blog_hidden
    for layer in range(config.decoder_layers):
        spec.append((f"init.l{layer}.h.w", (config.decoder_hidden, summary)))
        spec.append((f"init.l{layer}.h.b", (config.decoder_hidden,)))
        spec.append((f"init.l{layer}.c.w", (config.decoder_hidden, summary)))
        spec.append((f"init.l{layer}.c.b", (config.decoder_hidden,)))

    if v.use_external:
        spec.append(("user_mix", (config.user_dim, config.user_dim + 2 * config.desc_hidden)))
        spec.append(("out_mix", (config.vocab_size, config.decoder_hidden + config.user_dim)))
    else:
        spec.append(("out_proj", (config.vocab_size, config.decoder_hidden)))
    return spec


class ModelParams:
    """Structured view over a flat name -> Tensor mapping.

    The mapping is the single source of truth (serialization order =
    :func:`param_spec` order); the structured attributes alias the same
    tensors for forward-pass convenience.
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        expected = param_spec(config)
        missing = [n for n, _ in expected if n not in tensors]
        extra = [n for n in tensors if n not in {m for m, _ in expected}]
        if missing or extra:
            raise ValueError(f"parameter names mismatch: missing={missing} extra={extra}")
        for name, shape in expected:
            got = tensors[name].shape
            if got != shape:
                raise ValueError(f"parameter {name} has shape {got}, expected {shape}")
        self.config = config
        self._tensors = {name: tensors[name] for name, _ in expected}
        self._build_views()

    def _cell(self, prefix: str) -> LSTMCell:
        t = self._tensors
        return LSTMCell(w_x=t[f"{prefix}.w_x"], w_h=t[f"{prefix}.w_h"], b=t[f"{prefix}.b"])

    def _build_views(self):
        cfg, t = self.config, self._tensors
        v = cfg.variant
        self.embedding = t["embedding"]
        self.blog_fwd = [self._cell(f"blog_enc.l{i}.fwd") for i in range(cfg.blog_layers)]
        self.blog_bwd = [self._cell(f"blog_enc.l{i}.bwd") for i in range(cfg.blog_layers)]
        self.desc_fwd = [self._cell(f"desc_enc.l{i}.fwd") for i in range(cfg.desc_layers)] if v.needs_description else None
        self.desc_bwd = [self._cell(f"desc_enc.l{i}.bwd") for i in range(cfg.desc_layers)] if v.needs_description else None
        self.user_proj = Affine(t["user_proj.w"], t["user_proj.b"]) if v.needs_user_vector else None
        self.attn_blog = t["attn_blog"]
        self.attn_desc = t["attn_desc"] if v.use_coattention else None
        self.mem_update = t["mem_update"] if v.use_gated_memory else None
        self.mem_output = t["mem_output"] if v.use_gated_memory else None
        self.decoder = [self._cell(f"dec.l{i}") for i in range(cfg.decoder_layers)]
        self.state_init = [
            StateInit(
                h=Affine(t[f"init.l{i}.h.w"], t[f"init.l{i}.h.b"]),
                c=Affine(t[f"init.l{i}.c.w"], t[f"init.l{i}.c.b"]),
            )
            for i in range(cfg.decoder_layers)
        ]
        self.user_mix = t["user_mix"] if v.use_external else None
        self.out_mix = t["out_mix"] if v.use_external else None
        self.out_proj = t["out_proj"] if not v.use_external else None

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._tensors.items())

    def tensor(self, name: str) -> Tensor:
        return self._tensors[name]

    def with_tensors(self, tensors: dict[str, Tensor]) -> "ModelParams":
        merged = dict(self._tensors)
        merged.update(tensors)
        return ModelParams(self.config, merged)

    @property
    def n_parameters(self) -> int:
        return sum(t.size for t in self._tensors.values())


def build_model(config: ModelConfig, seed: int) -> ModelParams:
    """Allocate and initialize all parameters for the configured variant.

    Uniform [-0.08, 0.08] from a seeded generator, consumed in param_spec
    order (so equal seeds give bitwise-equal models); forget-gate bias
    slabs are then set to 1.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in param_spec(config):
        tensors[name] = Tensor(rng.uniform(-0.08, 0.08, size=shape))
    params = ModelParams(config, tensors)
    for stack in (params.blog_fwd, params.blog_bwd, params.desc_fwd or (),
                  params.desc_bwd or (), params.decoder):
        for cell in stack:
            cell.b.array[cell.hidden : 2 * cell.hidden] = 1.0
    return params


# ---------------------------------------------------------------------------
# Layer computations.
# ---------------------------------------------------------------------------


def lstm_step(cell: LSTMCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One LSTM cell application -> (h, c)."""
    hidden = cell.hidden
    pre = ad.add(ad.add(ad.matvec(cell.w_x, x), ad.matvec(cell.w_h, h_prev)), cell.b)
    gate_i = ad.sigmoid(ad.vslice(pre, 0, hidden))
    gate_f = ad.sigmoid(ad.vslice(pre, hidden, 2 * hidden))
    cand = ad.tanh(ad.vslice(pre, 2 * hidden, 3 * hidden))
    gate_o = ad.sigmoid(ad.vslice(pre, 3 * hidden, 4 * hidden))
    c = ad.add(ad.hadamard(gate_f, c_prev), ad.hadamard(gate_i, cand))
    h = ad.hadamard(gate_o, ad.tanh(c))
    return h, c


def bilstm_encode(fwd_cells: Sequence[LSTMCell], bwd_cells: Sequence[LSTMCell], inputs: Sequence[Tensor]) -> list[Tensor]:
    """Stacked bidirectional encoding; per position [h_fwd; h_bwd].

    Zero initial states.  Layer l+1 consumes layer l's concatenated
    outputs.  The sequence must be non-empty.
    """
    if len(inputs) == 0:
        raise ValueError("cannot encode an empty sequence")
    if len(fwd_cells) != len(bwd_cells) or len(fwd_cells) == 0:
        raise ValueError("encoder needs matching non-empty forward/backward stacks")
    seq = list(inputs)
    for fwd, bwd in zip(fwd_cells, bwd_cells):
        h = c = ad.zeros(fwd.hidden)
        fstates = []
        for x in seq:
            h, c = lstm_step(fwd, x, h, c)
            fstates.append(h)
        h = c = ad.zeros(bwd.hidden)
        bstates: list[Tensor | None] = [None] * len(seq)
        for idx in range(len(seq) - 1, -1, -1):
            h, c = lstm_step(bwd, seq[idx], h, c)
            bstates[idx] = h
        seq = [ad.concat([f, b]) for f, b in zip(fstates, bstates)]
    return seq


def user_embed(w: Tensor, b: Tensor, features: Tensor) -> Tensor:
    """Dense user vector v_u = tanh(W F + b)."""
    return ad.tanh(ad.add(ad.matvec(w, features), b))


def attention_context(s_prev: Tensor, states: Sequence[Tensor], w_a: Tensor) -> AttentionResult:
    """Bilinear attention: score_j = s' W h_j, weights = softmax, context = sum.

    Implemented as q = W' s once per step, then one matrix-vector product
    over the stacked states.
    """
    if len(states) == 0:
        raise ValueError("attention needs at least one encoder state")
    hmat = ad.stack_rows(states)
    q = ad.matvec(ad.transpose(w_a), s_prev)
    scores = ad.matvec(hmat, q)
    weights = ad.softmax(scores)
    context = ad.matvec(ad.transpose(hmat), weights)
    return AttentionResult(context=context, weights=weights)


def gated_memory_step(
    w_update: Tensor,
    w_output: Tensor,
    s_t: Tensor,
    s_prev: Tensor,
    e_prev: Tensor,
    c_blog: Tensor,
    m_prev: Tensor,
) -> tuple[Tensor, Tensor]:
    """Decay the user memory and gate what the decoder may read.

    update gate  g_u = sigmoid(W_u s_t)        -> M_t   = g_u * M_{t-1}
    output gate  g_o = sigmoid(W_o [s_prev; e_prev; c_blog]) -> M_t^o = g_o * M_t

    Both gates are strictly inside (0, 1), so |M_t| decays monotonically
    coordinate-wise.  The caller decides which state to pass as ``s_t``;
    the decoder passes the previous step's state in both slots because the
    new state does not exist until after the memory read feeds the LSTM.
    """
    g_u = ad.sigmoid(ad.matvec(w_update, s_t))
    m_t = ad.hadamard(g_u, m_prev)
    g_o = ad.sigmoid(ad.matvec(w_output, ad.concat([s_prev, e_prev, c_blog])))
    m_out = ad.hadamard(g_o, m_t)
    return m_t, m_out


# ---------------------------------------------------------------------------
# Full-network forward pieces.
# ---------------------------------------------------------------------------


def embed_sequence(params: ModelParams, ids: Sequence[int]) -> list[Tensor]:
    return [ad.embedding_lookup(params.embedding, i) for i in ids]


def encode_blog(params: ModelParams, x_ids: Sequence[int]) -> list[Tensor]:
    return bilstm_encode(params.blog_fwd, params.blog_bwd, embed_sequence(params, x_ids))


def encode_description(params: ModelParams, d_ids: Sequence[int]) -> list[Tensor]:
    if params.desc_fwd is None:
        raise ValueError("this variant has no description encoder")
    return bilstm_encode(params.desc_fwd, params.desc_bwd, embed_sequence(params, d_ids))


def user_vector(params: ModelParams, features: Tensor | np.ndarray) -> Tensor:
    if params.user_proj is None:
        raise ValueError("this variant has no user projection")
    if not isinstance(features, Tensor):
        features = Tensor(features)
    if features.shape != (params.config.feature_dim,):
        raise ad.ShapeError(
            f"user features have shape {features.shape}, expected ({params.config.feature_dim},)"
        )
    return user_embed(params.user_proj.w, params.user_proj.b, features)


def init_decoder_state(params: ModelParams, blog_states: Sequence[Tensor], v_u: Tensor | None) -> DecoderState:
    """Initial per-layer (h, c) from the encoder's final states; M_0 = v_u."""
    cfg = params.config
    if cfg.variant.use_gated_memory and v_u is None:
        raise ValueError("gated memory needs a user vector for M_0")
    hidden = cfg.blog_hidden
    # Top layer states are [fwd; bwd]: forward summary sits at the last
    # position, backward summary at the first.
    summary = ad.concat([
        ad.vslice(blog_states[-1], 0, hidden),
        ad.vslice(blog_states[0], hidden, 2 * hidden),
    ])
    layers = []
    for init in params.state_init:
        h0 = ad.tanh(ad.add(ad.matvec(init.h.w, summary), init.h.b))
        c0 = ad.tanh(ad.add(ad.matvec(init.c.w, summary), init.c.b))
        layers.append((h0, c0))
    memory = v_u if cfg.variant.use_gated_memory else None
    return DecoderState(layers=tuple(layers), memory=memory, step=0)


def decoder_step(
    params: ModelParams,
    state: DecoderState,
    y_prev: int,
    blog_states: Sequence[Tensor],
    desc_states: Sequence[Tensor] | None,
    v_u: Tensor | None,
) -> StepResult:
    """One teacher-forcing/decoding step: previous token id -> next logits.

    All step-t gates and attention read the previous top state; the
    memory read M_t^o joins the LSTM input, and the new top state feeds
    the output head.
    """
    cfg = params.config
    v = cfg.variant
    if len(state.layers) != cfg.decoder_layers:
        raise ValueError("decoder state does not match the configured depth")
    if v.use_gated_memory != (state.memory is not None):
        raise ValueError("decoder state memory does not match the variant")
    if v.use_coattention != (desc_states is not None):
        raise ValueError("description states do not match the variant")
    if v.needs_user_vector != (v_u is not None):
        raise ValueError("user vector does not match the variant")

    s_prev = state.top_h
    blog_attn = attention_context(s_prev, blog_states, params.attn_blog)
    desc_attn = attention_context(s_prev, desc_states, params.attn_desc) if v.use_coattention else None
    e_prev = ad.embedding_lookup(params.embedding, y_prev)

    new_memory = None
    m_read = None
    if v.use_gated_memory:
        new_memory, m_read = gated_memory_step(
            params.mem_update, params.mem_output,
            s_prev, s_prev, e_prev, blog_attn.context, state.memory,
        )

    parts = [blog_attn.context]
    if v.use_coattention:
        parts.append(desc_attn.context)
    parts.append(e_prev)
    if v.use_user_embedding:
        parts.append(v_u)
    if v.use_gated_memory:
        parts.append(m_read)
    x = ad.concat(parts)

    new_layers = []
    for cell, (h_prev, c_prev) in zip(params.decoder, state.layers):
        h, c = lstm_step(cell, x, h_prev, c_prev)
        new_layers.append((h, c))
        x = h
    s_t = new_layers[-1][0]

    if v.use_external:
        r_u = ad.matvec(params.user_mix, ad.concat([v_u, desc_attn.context]))
        logits = ad.matvec(params.out_mix, ad.concat([s_t, r_u]))
    else:
        logits = ad.matvec(params.out_proj, s_t)

    new_state = DecoderState(layers=tuple(new_layers), memory=new_memory, step=state.step + 1)
    return StepResult(
        logits=logits,
        state=new_state,
        blog_attention=blog_attn.weights,
        desc_attention=desc_attn.weights if desc_attn is not None else None,
    )
