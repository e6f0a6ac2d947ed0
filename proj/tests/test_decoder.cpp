#include <doctest.h>

#include "pardec/action_codec.hpp"
#include "pardec/decoder.hpp"
#include "pardec/prompts.hpp"

using namespace pardec;

namespace testmodels {

// Slot i's answer is the previous slot's token + 1; slot 1 answers `first`.
// Each Jacobi pass can only fix one more slot, the worst case for causal
// iteration.
struct ShiftModel {
  TokenId first = 10;
  TokenId vocab = 512;
};

inline TokenId ar_step(const ShiftModel& m, std::span<const TokenId> context) {
  // Contexts here are prompt (length 1) + emitted tokens.
  return context.size() == 1 ? m.first : (context.back() + 1) % m.vocab;
}

inline TokenSequence jacobi_update(const ShiftModel& m, std::span<const TokenId> context,
                                   std::span<const TokenId> response, MaskMode) {
  TokenSequence out(response.size());
  for (std::size_t i = 0; i < response.size(); ++i) {
    const TokenId prev = i == 0 ? context.back() : response[i - 1];
    out[i] = (i == 0 && context.size() == 1) ? m.first : (prev + 1) % m.vocab;
  }
  return out;
}

// Bidirectional toy: every slot flips between two tokens, so iterates cycle
// with period 2 and never reach a fixed point.
struct FlipModel {};

inline TokenId ar_step(const FlipModel&, std::span<const TokenId>) { return 0; }

inline TokenSequence jacobi_update(const FlipModel&, std::span<const TokenId>, std::span<const TokenId> response,
                                   MaskMode) {
  TokenSequence out(response.size());
  for (std::size_t i = 0; i < response.size(); ++i) out[i] = response[i] == 0 ? 1 : 0;
  return out;
}

}  // namespace testmodels

namespace {

const CodecConfig kCodec = default_codec_config(512);

ToyModel default_model() { return build_model(ModelSpec{}); }

ToyModel zero_model() {
  ModelSpec s;
  s.init = WeightInit::Zero;
  return build_model(s);
}

TokenSequence prompt_of(std::size_t index) { return synthetic_prompt(2024, index, 16, kCodec); }

DecoderConfig causal(std::size_t n, std::uint64_t seed, std::size_t l = 37) {
  DecoderConfig dc;
  dc.mode = DecodeMode::JacobiCausal;
  dc.horizon = n;
  dc.total_length = l;
  dc.init = InitPolicy::uniform_action_block(seed, kCodec.action_token_base);
  return dc;
}

}  // namespace

TEST_CASE("AR decoding uses exactly l passes") {
  const auto m = default_model();
  const auto r = decode_ar(m, prompt_of(0), 37);
  CHECK(r.tokens.size() == 37);
  CHECK(r.trace.passes_total == 37);
  CHECK(r.trace.passes_changing == 37);
  for (std::size_t j = 0; j < 37; ++j) CHECK(r.trace.blocks[0].changed_positions[j] == std::vector<std::size_t>{j});
  CHECK(fixed_token_count(r.trace, 10) == 10);
}

TEST_CASE("AR with l = 1 is the argmax of the prompt-only row") {
  const auto m = default_model();
  const auto prompt = prompt_of(3);
  const auto r = decode_ar(m, prompt, 1);
  CHECK(r.tokens == TokenSequence{greedy_argmax(next_token_logits(m, std::span<const TokenId>(prompt)))});
}

TEST_CASE("constant-logit model decodes to token 0") {
  const auto m = zero_model();
  CHECK(decode_ar(m, prompt_of(0), 37).tokens == TokenSequence(37, 0));
}

TEST_CASE("constant-logit model converges in two Jacobi passes") {
  const auto m = zero_model();
  const auto r = decode_jacobi(m, prompt_of(0), causal(37, 1));
  CHECK(r.tokens == TokenSequence(37, 0));
  CHECK(r.trace.passes_total == 2);
  CHECK(r.trace.passes_changing == 1);
  CHECK(r.trace.converged);

  // Starting at the answer, one pass certifies it.
  DecoderConfig dc = causal(37, 1);
  dc.init = InitPolicy::constant(0);
  CHECK(decode_jacobi(m, prompt_of(0), dc).trace.passes_total == 1);
}

TEST_CASE("shift construction forces n changing passes") {
  const testmodels::ShiftModel m;
  const TokenSequence prompt{3};
  for (std::size_t n : {1u, 5u, 16u, 37u}) {
    DecoderConfig dc;
    dc.mode = DecodeMode::JacobiCausal;
    dc.horizon = dc.total_length = n;
    dc.init = InitPolicy::constant(400);  // 401 never appears among 10..10+n-1
    const auto r = decode_jacobi(m, prompt, dc);
    CHECK(r.trace.passes_changing == n);
    CHECK(r.trace.passes_total == n + 1);
    CHECK(r.tokens == decode_ar(m, prompt, n).tokens);
  }
}

TEST_CASE("causal Jacobi equals AR on the toy model") {
  const auto m = default_model();
  for (std::size_t p = 0; p < 20; ++p) {
    const auto prompt = prompt_of(p);
    const auto ar = decode_ar(m, prompt, 37).tokens;
    for (std::size_t n : {1u, 2u, 7u, 16u, 36u, 37u}) {
      const auto r = decode(m, prompt, causal(n, p + 100));
      REQUIRE(r.tokens == ar);
      CHECK(certify_fixed_point(m, prompt, r.trace));
    }
  }
}

TEST_CASE("blocked decoding partitions into ceil(l/n) blocks") {
  CHECK(block_sizes(37, 16) == std::vector<std::size_t>{16, 16, 5});
  CHECK(block_sizes(37, 7) == std::vector<std::size_t>{7, 7, 7, 7, 7, 2});
  CHECK(block_sizes(37, 37) == std::vector<std::size_t>{37});

  const auto m = default_model();
  const auto prompt = prompt_of(1);
  const auto r = decode_blocked(m, prompt, causal(16, 4));
  using B = std::pair<std::size_t, std::size_t>;
  CHECK(r.trace.block_boundaries() == std::vector<B>{{0, 16}, {16, 32}, {32, 37}});
  const auto r7 = decode_blocked(m, prompt, causal(7, 4));
  CHECK(r7.trace.blocks.size() == 6);
  CHECK(r7.tokens == decode_ar(m, prompt, 37).tokens);
}

TEST_CASE("single-block horizon behaves like decode_jacobi") {
  const auto m = default_model();
  const auto prompt = prompt_of(2);
  const auto a = decode(m, prompt, causal(37, 9));
  const auto b = decode_jacobi(m, prompt, causal(37, 9));
  CHECK(a.tokens == b.tokens);
  CHECK(a.trace.passes_total == b.trace.passes_total);
  CHECK(a.trace.blocks[0].iterates == b.trace.blocks[0].iterates);
  CHECK_THROWS_AS(decode_blocked(m, prompt, causal(37, 9)), ConfigError);
  CHECK_THROWS_AS(decode_jacobi(m, prompt, causal(16, 9)), ConfigError);
}

TEST_CASE("decoder config validation") {
  const auto m = default_model();
  const auto prompt = prompt_of(0);
  CHECK_THROWS_AS(decode(m, prompt, causal(0, 1)), ConfigError);
  CHECK_THROWS_AS(decode(m, prompt, causal(38, 1)), ConfigError);
  auto dc = causal(37, 1);
  dc.max_passes = 1;
  CHECK_THROWS_AS(decode(m, prompt, dc), ConfigError);
  CHECK(causal(16, 1).resolved_max_passes() == 17);
  DecoderConfig bi = causal(16, 1);
  bi.mode = DecodeMode::JacobiBidirectional;
  CHECK(bi.resolved_max_passes() == 64);
  CHECK(bi.resolved_cycle_detection());
  CHECK_FALSE(causal(16, 1).resolved_cycle_detection());
}

TEST_CASE("capacity overflow surfaces as CapacityError") {
  const auto m = default_model();
  const TokenSequence long_prompt(100, 5);
  CHECK_THROWS_AS(decode_ar(m, long_prompt, 37), CapacityError);
  CHECK_THROWS_AS(decode(m, long_prompt, causal(37, 1)), CapacityError);
}

TEST_CASE("fixed_token_count endpoints") {
  const auto m = default_model();
  const auto prompt = prompt_of(0);
  const auto r = decode(m, prompt, causal(37, 1));
  CHECK(fixed_token_count(r.trace, r.trace.passes_total) == 37);
  // Golden: prompt 0 of seed 2024, init seed 1.
  CHECK(fixed_token_count(r.trace, 0) == 0);
  CHECK(r.trace.passes_total == 24);
  CHECK_THROWS_AS(fixed_token_count(r.trace, r.trace.passes_total + 1), Error);

  const auto blocked = decode(m, prompt, causal(7, 1));
  CHECK(fixed_token_count(blocked.trace, blocked.trace.passes_total) == 37);
  CHECK(global_iterate(blocked.trace, 0) == initial_iterate(InitPolicy::uniform_action_block(1, 256), 37));
}

TEST_CASE("prefix fixing holds over 200 seeded trials") {
  const auto m = default_model();
  std::size_t trials = 0;
  for (std::size_t p = 0; p < 40; ++p) {
    const auto prompt = prompt_of(p);
    for (std::uint64_t s = 0; s < 5; ++s, ++trials) {
      const auto r = decode(m, prompt, causal(37, 1000 + p * 5 + s));
      const auto& block = r.trace.blocks[0];
      std::size_t prev_prefix = 0;
      for (std::size_t j = 0; j <= r.trace.passes_total; ++j) {
        REQUIRE(fixed_token_count(r.trace, j) >= std::min<std::size_t>(j, 37));
        const std::size_t prefix = matching_prefix(block.iterates[j], r.tokens);
        REQUIRE(prefix >= std::min<std::size_t>(j, 37));
        REQUIRE(prefix >= prev_prefix);
        prev_prefix = prefix;
      }
      REQUIRE(r.trace.passes_changing <= 37);
      REQUIRE(r.trace.passes_total <= 38);
    }
  }
  CHECK(trials == 200);
}

TEST_CASE("final output does not depend on initialization in causal mode") {
  const auto m = default_model();
  const auto prompt = prompt_of(5);
  auto constant = causal(37, 0);
  constant.init = InitPolicy::constant(kCodec.begin_token);
  const auto base = decode(m, prompt, constant).tokens;
  for (std::uint64_t s = 0; s < 10; ++s)
    for (std::size_t n : {7u, 16u, 37u}) CHECK(decode(m, prompt, causal(n, s)).tokens == base);
}

TEST_CASE("converged traces carry a verifiable certificate") {
  const auto m = default_model();
  const auto prompt = prompt_of(4);
  const auto r = decode(m, prompt, causal(16, 2));
  for (const auto& b : r.trace.blocks) CHECK(b.iterates.back() == b.iterates[b.iterates.size() - 2]);
  CHECK(certify_fixed_point(m, prompt, r.trace));

  // Tampering with the output breaks the certificate.
  auto forged = r.trace;
  forged.blocks[0].iterates.back()[3] ^= 1;
  CHECK_FALSE(certify_fixed_point(m, prompt, forged));
}

TEST_CASE("cycle detection and the pass cap in bidirectional mode") {
  const testmodels::FlipModel m;
  const TokenSequence prompt{1};
  DecoderConfig dc;
  dc.mode = DecodeMode::JacobiBidirectional;
  dc.horizon = dc.total_length = 4;
  dc.init = InitPolicy::constant(0);
  try {
    decode(m, prompt, dc);
    FAIL("expected a cycle");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == ErrorKind::CycleDetected);
    CHECK(e.block_index() == 0);
    CHECK(e.trace().passes_total == 2);
    CHECK(e.trace().blocks[0].iterates.size() == 3);
    CHECK_FALSE(e.trace().converged);
  }
  dc.cycle_detection = false;
  try {
    decode(m, prompt, dc);
    FAIL("expected non-convergence");
  } catch (const DecodeError& e) {
    CHECK(e.kind() == ErrorKind::NonConvergence);
    CHECK(e.trace().passes_total == 16);  // 4n cap
    CHECK(e.trace().blocks[0].iterates.size() == 17);
  }
}

TEST_CASE("bidirectional runs on the toy model terminate or raise with a trace") {
  const auto m = default_model();
  std::size_t certified = 0, failed = 0;
  for (std::size_t p = 0; p < 10; ++p) {
    for (std::size_t n : {7u, 37u}) {
      DecoderConfig dc = causal(n, p);
      dc.mode = DecodeMode::JacobiBidirectional;
      try {
        const auto r = decode(m, prompt_of(p), dc);
        CHECK(certify_fixed_point(m, prompt_of(p), r.trace));
        ++certified;
      } catch (const DecodeError& e) {
        ++failed;
        CHECK(e.trace().passes_total <= 4 * n * block_sizes(37, n).size());
        CHECK_FALSE(e.trace().blocks.empty());
        CHECK(e.trace().blocks.back().iterates.size() == e.trace().blocks.back().passes + 1);
      }
    }
  }
  CHECK(certified + failed == 20);
}

TEST_CASE("preemptive fixed tokens follow their definition") {
  // Hand-built single-block trace with final output [5, 6, 7, 8].
  DecodeTrace t;
  t.mode = DecodeMode::JacobiCausal;
  t.response_length = t.horizon = 4;
  BlockTrace b;
  b.start = 0;
  b.end = 4;
  b.iterates = {{0, 0, 0, 0}, {5, 1, 7, 8}, {5, 6, 7, 8}, {5, 6, 7, 8}};
  b.passes = 3;
  b.converged = true;
  t.blocks.push_back(b);
  t.passes_total = 3;
  t.converged = true;
  // Settle passes: slot0 1, slot1 2, slot2 1, slot3 1 -> slots 2 and 3 are preemptive.
  CHECK(stabilization_passes(t.blocks[0]) == std::vector<std::size_t>{1, 2, 1, 1});
  CHECK(preemptive_fixed_tokens(t) == 2);
}

TEST_CASE("initial iterates are seeded action tokens") {
  const auto a = initial_iterate(InitPolicy::uniform_action_block(3, 256), 37);
  const auto b = initial_iterate(InitPolicy::uniform_action_block(3, 256), 37);
  const auto c = initial_iterate(InitPolicy::uniform_action_block(4, 256), 37);
  CHECK(a == b);
  CHECK(a != c);
  for (TokenId t : a) CHECK(kCodec.is_action_token(t));
  CHECK(initial_iterate(InitPolicy::constant(1), 5) == TokenSequence(5, 1));
}
