#include "scalweight/checkpoint.hpp"

#include <cmath>
#include <cstring>

#include <json.hpp>

#include "scalweight/error.hpp"
#include "scalweight/io.hpp"

namespace scalweight {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'W', 'T'};

void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64le(out, bits);
}

struct Reader {
  std::string_view data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw IoError("checkpoint: truncated");
  }
  std::uint32_t u32le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i]))
           << (8 * i);
    pos += 8;
    return v;
  }
  double f64le() {
    const std::uint64_t bits = u64le();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }
};

nlohmann::json metadata_json(const Checkpoint& ck) {
  nlohmann::json j;
  if (!ck.adaptive_s.empty()) j["adaptive_s"] = ck.adaptive_s;
  j["epoch"] = ck.epoch;
  j["member_id"] = ck.member_id;
  j["model"] = {
      {"base_width", ck.spec.base_width},
      {"head_depth", ck.spec.head_depth},
      {"input_dim", ck.spec.input_dim},
      {"output_dims", ck.spec.output_dims},
      {"shared_head_layers", ck.spec.shared_head_layers},
      {"trunk_depth", ck.spec.trunk_depth},
      {"width_multiplier", ck.spec.width_multiplier},
  };
  j["optimizer"] = {
      {"slots", ck.optimizer_slots.size()},
      {"step", ck.optimizer_step},
  };
  j["param_count"] = ck.params.size();
  if (!ck.rng_states.empty()) j["rng"] = ck.rng_states;
  if (ck.has_score) {
    if (!std::isfinite(ck.score))
      throw IoError("checkpoint: non-finite score");
    j["score"] = ck.score;
  }
  if (!ck.weights.empty()) j["weights"] = ck.weights;
  return j;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const std::string meta = metadata_json(ck).dump();
  std::string out;
  out.reserve(16 + meta.size() +
              8 * ck.params.size() * (1 + ck.optimizer_slots.size()));
  out.append(kMagic, 4);
  put_u32le(out, kCheckpointVersion);
  put_u64le(out, meta.size());
  out += meta;
  for (double v : ck.params) put_f64le(out, v);
  for (const auto& slot : ck.optimizer_slots) {
    if (slot.size() != ck.params.size())
      throw IoError("checkpoint: optimizer slot size mismatch");
    for (double v : slot) put_f64le(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("checkpoint: bad magic");
  r.pos = 4;
  const std::uint32_t version = r.u32le();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version");
  const std::uint64_t meta_len = r.u64le();
  r.need(meta_len);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(r.pos, meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  r.pos += meta_len;

  Checkpoint ck;
  try {
    ck.epoch = j.at("epoch").get<std::size_t>();
    ck.member_id = j.at("member_id").get<std::size_t>();
    const auto& m = j.at("model");
    ck.spec.base_width = m.at("base_width").get<std::size_t>();
    ck.spec.head_depth = m.at("head_depth").get<std::size_t>();
    ck.spec.input_dim = m.at("input_dim").get<std::size_t>();
    ck.spec.output_dims = m.at("output_dims").get<std::vector<std::size_t>>();
    ck.spec.shared_head_layers = m.at("shared_head_layers").get<std::size_t>();
    ck.spec.trunk_depth = m.at("trunk_depth").get<std::size_t>();
    ck.spec.width_multiplier = m.at("width_multiplier").get<double>();
    ck.optimizer_step = j.at("optimizer").at("step").get<std::size_t>();
    const auto slots = j.at("optimizer").at("slots").get<std::size_t>();
    const auto param_count = j.at("param_count").get<std::size_t>();
    if (j.contains("adaptive_s"))
      ck.adaptive_s = j.at("adaptive_s").get<std::vector<double>>();
    if (j.contains("rng"))
      ck.rng_states = j.at("rng").get<std::vector<std::string>>();
    if (j.contains("weights"))
      ck.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("score")) {
      ck.score = j.at("score").get<double>();
      ck.has_score = true;
    }
    ck.spec.validate();
    if (param_count != param_count_for(ck.spec))
      throw IoError("checkpoint: param_count does not match the model spec");
    ck.params.resize(param_count);
    for (auto& v : ck.params) v = r.f64le();
    ck.optimizer_slots.assign(slots, std::vector<double>(param_count));
    for (auto& slot : ck.optimizer_slots)
      for (auto& v : slot) v = r.f64le();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  if (r.pos != bytes.size()) throw IoError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  atomic_write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

Checkpoint checkpoint_from_trainer(const Trainer& trainer,
                                   std::size_t member_id) {
  Checkpoint ck;
  ck.member_id = member_id;
  ck.epoch = trainer.epochs_done();
  ck.spec = trainer.model().spec();
  const auto values = trainer.model().values();
  ck.params.assign(values.begin(), values.end());
  ck.optimizer_step = trainer.optimizer().step_index();
  for (std::size_t i = 0; i < trainer.optimizer().slot_count(); ++i) {
    const auto slot = trainer.optimizer().slot(i);
    ck.optimizer_slots.emplace_back(slot.begin(), slot.end());
  }
  ck.weights = trainer.weights().values();
  ck.adaptive_s = trainer.adaptive_s();
  ck.rng_states = trainer.serialize_rngs();
  return ck;
}

void restore_trainer(Trainer& trainer, const Checkpoint& ck) {
  if (trainer.model().spec() != ck.spec)
    throw ConfigError("checkpoint: model spec mismatch");
  auto values = trainer.model().values();
  if (values.size() != ck.params.size())
    throw ConfigError("checkpoint: parameter count mismatch");
  std::copy(ck.params.begin(), ck.params.end(), values.begin());
  auto& opt = trainer.optimizer();
  if (opt.slot_count() != ck.optimizer_slots.size())
    throw ConfigError("checkpoint: optimizer state mismatch");
  for (std::size_t i = 0; i < ck.optimizer_slots.size(); ++i) {
    auto slot = opt.slot(i);
    std::copy(ck.optimizer_slots[i].begin(), ck.optimizer_slots[i].end(),
              slot.begin());
  }
  if (!ck.weights.empty()) trainer.set_weights(WeightVector(ck.weights));
  if (!ck.adaptive_s.empty()) trainer.set_adaptive_s(ck.adaptive_s);
  trainer.restore_rngs(ck.rng_states);
  trainer.set_epochs_done(ck.epoch);
  opt.set_step_index(ck.optimizer_step);  // stored value is authoritative
}

}  // namespace scalweight
