#include "marl/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <utility>

#include "marl/ddpg.hpp"
#include "marl/sac.hpp"

namespace marl {
namespace {

constexpr char kMagic[8] = {'M', 'A', 'R', 'L', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;

enum Dtype : uint8_t { kF64 = 0, kU64 = 1, kBytes = 2 };

size_t elem_size(uint8_t dt) { return dt == kBytes ? 1 : 8; }

struct Section {
  std::string name;
  uint8_t dtype = kF64;
  uint32_t rows = 0, cols = 0;
  uint64_t offset = 0;  // into the payload blob

  uint64_t byte_size() const {
    return uint64_t(rows) * cols * elem_size(dtype);
  }
};

// All multi-byte values are written least-significant byte first regardless
// of host order.
struct Writer {
  std::vector<Section> table;
  std::string blob;

  static void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
  }
  static void put_f64(std::string& out, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(out, v);
  }

  Section& begin(const std::string& name, uint8_t dt, uint32_t rows, uint32_t cols) {
    table.push_back({name, dt, rows, cols, blob.size()});
    return table.back();
  }
  void add_f64(const std::string& name, const double* p, uint32_t rows, uint32_t cols) {
    begin(name, kF64, rows, cols);
    for (uint64_t i = 0; i < uint64_t(rows) * cols; ++i) put_f64(blob, p[i]);
  }
  void add_array(const std::string& name, const Array& a) {
    add_f64(name, a.data.data(), uint32_t(a.rows), uint32_t(a.cols));
  }
  void add_u64(const std::string& name, const uint64_t* p, uint32_t count) {
    begin(name, kU64, 1, count);
    for (uint32_t i = 0; i < count; ++i) put_u64(blob, p[i]);
  }
  void add_bytes(const std::string& name, const std::string& s) {
    begin(name, kBytes, 1, uint32_t(s.size()));
    blob += s;
  }

  void write(const std::string& path) const {
    std::string head(kMagic, sizeof kMagic);
    for (int i = 0; i < 4; ++i) head.push_back(char(uint8_t(kVersion >> (8 * i))));
    const uint32_t n = uint32_t(table.size());
    for (int i = 0; i < 4; ++i) head.push_back(char(uint8_t(n >> (8 * i))));
    for (const Section& s : table) {
      const uint16_t len = uint16_t(s.name.size());
      head.push_back(char(uint8_t(len)));
      head.push_back(char(uint8_t(len >> 8)));
      head += s.name;
      head.push_back(char(s.dtype));
      for (int i = 0; i < 4; ++i) head.push_back(char(uint8_t(s.rows >> (8 * i))));
      for (int i = 0; i < 4; ++i) head.push_back(char(uint8_t(s.cols >> (8 * i))));
      put_u64(head, s.offset);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f.write(head.data(), std::streamsize(head.size()));
    f.write(blob.data(), std::streamsize(blob.size()));
    if (!f) throw std::runtime_error("checkpoint: short write to " + path);
  }
};

struct Reader {
  std::string blob;
  std::map<std::string, Section> sections;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("checkpoint " + path + ": " + what);
  }

  static uint64_t get_u64(const std::string& b, size_t off) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(b[off + i])) << (8 * i);
    return v;
  }
  static double get_f64(const std::string& b, size_t off) {
    const uint64_t v = get_u64(b, off);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  void open(const std::string& p) {
    path = p;
    std::ifstream f(p, std::ios::binary);
    if (!f) fail("cannot open");
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    size_t at = 0;
    auto need = [&](size_t n, const char* what) {
      if (raw.size() - at < n) fail(std::string("truncated: ") + what);
    };
    need(16, "header");
    if (std::memcmp(raw.data(), kMagic, sizeof kMagic) != 0) fail("bad magic");
    at = 8;
    uint32_t version = 0, count = 0;
    for (int i = 0; i < 4; ++i) version |= uint32_t(uint8_t(raw[at + i])) << (8 * i);
    at += 4;
    if (version != kVersion) fail("unsupported version " + std::to_string(version));
    for (int i = 0; i < 4; ++i) count |= uint32_t(uint8_t(raw[at + i])) << (8 * i);
    at += 4;
    for (uint32_t k = 0; k < count; ++k) {
      need(2, "section table");
      const uint16_t len = uint16_t(uint8_t(raw[at])) | uint16_t(uint8_t(raw[at + 1])) << 8;
      at += 2;
      need(size_t(len) + 17, "section table");
      Section s;
      s.name = raw.substr(at, len);
      at += len;
      s.dtype = uint8_t(raw[at++]);
      if (s.dtype > kBytes) fail("bad dtype in " + s.name);
      for (int i = 0; i < 4; ++i) s.rows |= uint32_t(uint8_t(raw[at + i])) << (8 * i);
      at += 4;
      for (int i = 0; i < 4; ++i) s.cols |= uint32_t(uint8_t(raw[at + i])) << (8 * i);
      at += 4;
      s.offset = get_u64(raw, at);
      at += 8;
      if (!sections.emplace(s.name, s).second) fail("duplicate section " + s.name);
    }
    blob = raw.substr(at);
    for (const auto& [name, s] : sections)
      if (s.offset + s.byte_size() > blob.size()) fail("section out of range: " + name);
  }

  const Section& get(const std::string& name, uint8_t dt) const {
    auto it = sections.find(name);
    if (it == sections.end()) fail("missing section " + name);
    if (it->second.dtype != dt) fail("wrong dtype for " + name);
    return it->second;
  }

  Array array(const std::string& name) const {
    const Section& s = get(name, kF64);
    Array a(int(s.rows), int(s.cols));
    for (size_t i = 0; i < a.size(); ++i)
      a.data[i] = get_f64(blob, s.offset + 8 * i);
    return a;
  }
  void into_array(const std::string& name, Array& dst) const {
    const Section& s = get(name, kF64);
    if (int(s.rows) != dst.rows || int(s.cols) != dst.cols)
      fail("shape mismatch for " + name);
    for (size_t i = 0; i < dst.size(); ++i)
      dst.data[i] = get_f64(blob, s.offset + 8 * i);
  }
  std::vector<uint64_t> u64s(const std::string& name) const {
    const Section& s = get(name, kU64);
    std::vector<uint64_t> v(size_t(s.rows) * s.cols);
    for (size_t i = 0; i < v.size(); ++i) v[i] = get_u64(blob, s.offset + 8 * i);
    return v;
  }
  uint64_t u64(const std::string& name) const {
    auto v = u64s(name);
    if (v.size() != 1) fail("expected scalar in " + name);
    return v[0];
  }
  std::vector<double> f64s(const std::string& name) const {
    const Section& s = get(name, kF64);
    std::vector<double> v(size_t(s.rows) * s.cols);
    for (size_t i = 0; i < v.size(); ++i) v[i] = get_f64(blob, s.offset + 8 * i);
    return v;
  }
  std::string bytes(const std::string& name) const {
    const Section& s = get(name, kBytes);
    return blob.substr(s.offset, s.byte_size());
  }
};

void save_net(Writer& w, const std::string& prefix, const std::vector<const Array*>& ps) {
  for (size_t k = 0; k < ps.size(); ++k)
    w.add_array(prefix + "/p" + std::to_string(k), *ps[k]);
}

void load_net(const Reader& r, const std::string& prefix, const std::vector<Array*>& ps) {
  for (size_t k = 0; k < ps.size(); ++k)
    r.into_array(prefix + "/p" + std::to_string(k), *ps[k]);
}

void save_opt(Writer& w, const std::string& prefix, const std::vector<AdamState>& opt) {
  std::vector<uint64_t> ts;
  for (size_t k = 0; k < opt.size(); ++k) {
    w.add_array(prefix + "/m" + std::to_string(k), opt[k].m);
    w.add_array(prefix + "/v" + std::to_string(k), opt[k].v);
    ts.push_back(uint64_t(opt[k].t));
  }
  w.add_u64(prefix + "/t", ts.data(), uint32_t(ts.size()));
}

void load_opt(const Reader& r, const std::string& prefix, std::vector<AdamState>& opt) {
  const auto ts = r.u64s(prefix + "/t");
  if (ts.size() != opt.size()) r.fail("optimizer state count mismatch at " + prefix);
  for (size_t k = 0; k < opt.size(); ++k) {
    r.into_array(prefix + "/m" + std::to_string(k), opt[k].m);
    r.into_array(prefix + "/v" + std::to_string(k), opt[k].v);
    opt[k].t = int64_t(ts[k]);
  }
}

void save_agent(Writer& w, const std::string& pre, const Agent& base) {
  const AlgoId id = agent_algo(base);
  w.add_bytes(pre + "/algo", std::string(1, char(uint8_t(id))));
  w.add_bytes(pre + "/name", base.name());
  const uint64_t updates = uint64_t(base.updates());
  w.add_u64(pre + "/updates", &updates, 1);

  if (algo_is_sac(id)) {
    const auto& a = dynamic_cast<const SacAgent&>(base);
    const double cf[] = {a.cfg.gamma,   a.cfg.tau,     a.cfg.actor_lr,
                         a.cfg.critic_lr, a.cfg.alpha_d, a.cfg.alpha_c};
    w.add_f64(pre + "/cfg_f", cf, 1, 6);
    const uint64_t cu[] = {uint64_t(a.cfg.mc_samples), uint64_t(a.cfg.hidden),
                           uint64_t(a.cfg.centralized)};
    w.add_u64(pre + "/cfg_u", cu, 3);
    save_net(w, pre + "/actor", a.actor.all());
    save_net(w, pre + "/actor_t", a.actor_target.all());
    save_net(w, pre + "/c1", a.critic1.all());
    save_net(w, pre + "/c2", a.critic2.all());
    save_net(w, pre + "/t1", a.target1.all());
    save_net(w, pre + "/t2", a.target2.all());
    save_opt(w, pre + "/opt_actor", a.actor_opt);
    save_opt(w, pre + "/opt_c1", a.critic1_opt);
    save_opt(w, pre + "/opt_c2", a.critic2_opt);
  } else {
    const auto& a = dynamic_cast<const DdpgAgent&>(base);
    const double cf[] = {a.cfg.gamma,     a.cfg.tau,       a.cfg.actor_lr,
                         a.cfg.critic_lr, a.cfg.eps.start, a.cfg.eps.end};
    w.add_f64(pre + "/cfg_f", cf, 1, 6);
    const uint64_t cu[] = {uint64_t(a.cfg.hidden), uint64_t(a.cfg.centralized),
                           uint64_t(a.cfg.eps.horizon)};
    w.add_u64(pre + "/cfg_u", cu, 3);
    save_net(w, pre + "/actor", a.actor.all());
    save_net(w, pre + "/actor_t", a.actor_target.all());
    save_net(w, pre + "/critic", a.critic.all());
    save_net(w, pre + "/critic_t", a.critic_target.all());
    save_opt(w, pre + "/opt_actor", a.actor_opt);
    save_opt(w, pre + "/opt_critic", a.critic_opt);
  }
}

std::unique_ptr<Agent> load_agent(const Reader& r, const std::string& pre, int index,
                                  const std::vector<int>& obs_dims) {
  const std::string tag = r.bytes(pre + "/algo");
  if (tag.size() != 1 || uint8_t(tag[0]) > uint8_t(AlgoId::hddpg))
    r.fail("bad algorithm tag at " + pre);
  const AlgoId id = AlgoId(uint8_t(tag[0]));
  const std::string name = r.bytes(pre + "/name");
  const auto cf = r.f64s(pre + "/cfg_f");
  const auto cu = r.u64s(pre + "/cfg_u");
  if (cf.size() != 6 || cu.size() != 3) r.fail("bad config block at " + pre);

  // Parameters are overwritten below, so the construction draws are discarded.
  Rng scratch(0);
  std::unique_ptr<Agent> out;
  if (algo_is_sac(id)) {
    SacConfig cfg;
    cfg.gamma = cf[0];
    cfg.tau = cf[1];
    cfg.actor_lr = cf[2];
    cfg.critic_lr = cf[3];
    cfg.alpha_d = cf[4];
    cfg.alpha_c = cf[5];
    cfg.mc_samples = int(cu[0]);
    cfg.hidden = int(cu[1]);
    cfg.centralized = cu[2] != 0;
    auto a = std::make_unique<SacAgent>(name, index, obs_dims, cfg, scratch);
    load_net(r, pre + "/actor", a->actor.all());
    load_net(r, pre + "/actor_t", a->actor_target.all());
    load_net(r, pre + "/c1", a->critic1.all());
    load_net(r, pre + "/c2", a->critic2.all());
    load_net(r, pre + "/t1", a->target1.all());
    load_net(r, pre + "/t2", a->target2.all());
    load_opt(r, pre + "/opt_actor", a->actor_opt);
    load_opt(r, pre + "/opt_c1", a->critic1_opt);
    load_opt(r, pre + "/opt_c2", a->critic2_opt);
    out = std::move(a);
  } else {
    DdpgConfig cfg;
    cfg.gamma = cf[0];
    cfg.tau = cf[1];
    cfg.actor_lr = cf[2];
    cfg.critic_lr = cf[3];
    cfg.eps.start = cf[4];
    cfg.eps.end = cf[5];
    cfg.hidden = int(cu[0]);
    cfg.centralized = cu[1] != 0;
    cfg.eps.horizon = int64_t(cu[2]);
    auto a = std::make_unique<DdpgAgent>(name, index, obs_dims, cfg, scratch);
    load_net(r, pre + "/actor", a->actor.all());
    load_net(r, pre + "/actor_t", a->actor_target.all());
    load_net(r, pre + "/critic", a->critic.all());
    load_net(r, pre + "/critic_t", a->critic_target.all());
    load_opt(r, pre + "/opt_actor", a->actor_opt);
    load_opt(r, pre + "/opt_critic", a->critic_opt);
    out = std::move(a);
  }
  out->set_updates(int64_t(r.u64(pre + "/updates")));
  return out;
}

}  // namespace

const char* algo_name(AlgoId id) {
  switch (id) {
    case AlgoId::mahsac: return "mahsac";
    case AlgoId::hsac: return "hsac";
    case AlgoId::mahddpg: return "mahddpg";
    case AlgoId::hddpg: return "hddpg";
  }
  return "?";
}

bool parse_algo(const std::string& s, AlgoId& out) {
  for (AlgoId id : {AlgoId::mahsac, AlgoId::hsac, AlgoId::mahddpg, AlgoId::hddpg})
    if (s == algo_name(id)) {
      out = id;
      return true;
    }
  return false;
}

bool algo_centralized(AlgoId id) {
  return id == AlgoId::mahsac || id == AlgoId::mahddpg;
}

bool algo_is_sac(AlgoId id) { return id == AlgoId::mahsac || id == AlgoId::hsac; }

AlgoId agent_algo(const Agent& a) {
  if (const auto* s = dynamic_cast<const SacAgent*>(&a))
    return s->cfg.centralized ? AlgoId::mahsac : AlgoId::hsac;
  if (const auto* d = dynamic_cast<const DdpgAgent*>(&a))
    return d->cfg.centralized ? AlgoId::mahddpg : AlgoId::hddpg;
  throw std::runtime_error("checkpoint: unknown agent type");
}

void save_checkpoint(const std::string& path, const std::string& scenario,
                     const std::vector<std::unique_ptr<Agent>>& agents,
                     const Rng& trainer_rng) {
  Writer w;
  w.add_bytes("meta/scenario", scenario);
  const uint64_t n = agents.size();
  w.add_u64("meta/n_agents", &n, 1);
  std::vector<uint64_t> dims;
  for (const auto& a : agents) dims.push_back(uint64_t(a->obs_dim()));
  w.add_u64("meta/obs_dims", dims.data(), uint32_t(dims.size()));
  w.add_u64("meta/rng", trainer_rng.state(), 4);
  for (size_t i = 0; i < agents.size(); ++i)
    save_agent(w, "a" + std::to_string(i), *agents[i]);
  w.write(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r;
  r.open(path);
  Checkpoint ck;
  ck.scenario = r.bytes("meta/scenario");
  const uint64_t n = r.u64("meta/n_agents");
  const auto dims = r.u64s("meta/obs_dims");
  if (dims.size() != n) r.fail("obs_dims count mismatch");
  for (uint64_t d : dims) ck.obs_dims.push_back(int(d));
  const auto rs = r.u64s("meta/rng");
  if (rs.size() != 4) r.fail("bad rng state");
  std::copy(rs.begin(), rs.end(), ck.rng_state.begin());
  for (uint64_t i = 0; i < n; ++i)
    ck.agents.push_back(load_agent(r, "a" + std::to_string(i), int(i), ck.obs_dims));
  return ck;
}

}  // namespace marl
