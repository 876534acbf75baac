#include "stqa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stqa/format.hpp"
#include "stqa/metrics.hpp"

namespace stqa {

namespace {

constexpr double kEps = 1e-9;

Point read_point(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string describe(const Payload& p) { return payload_to_json(p).dump(); }

bool covers(double t0, double t1, double t) { return t >= t0 - kEps && t <= t1 + kEps; }

}  // namespace

SceneScript script_from_json(const nlohmann::json& doc) {
  SceneScript s;
  s.name = doc.value("name", std::string());
  s.video_id = doc.value("video_id", std::string("synth"));
  s.duration_s = doc.value("duration_s", 30.0);
  s.fps = doc.value("fps", 1.0);
  for (const auto& ij : doc.at("instruments")) {
    ScriptedInstrument inst;
    inst.instrument = ij.at("instrument").get<std::string>();
    for (const auto& mj : ij.at("motion")) {
      MotionSegment m;
      m.t0 = mj.at("t0").get<double>();
      m.t1 = mj.at("t1").get<double>();
      m.from = read_point(mj.at("from"));
      m.to = mj.contains("to") ? read_point(mj.at("to")) : m.from;
      if (mj.contains("size")) {
        m.width = mj["size"].at(0).get<double>();
        m.height = mj["size"].at(1).get<double>();
      }
      inst.motion.push_back(m);
    }
    for (const auto& aj : ij.value("interactions", nlohmann::json::array())) {
      inst.interactions.push_back({aj.at("t0").get<double>(), aj.at("t1").get<double>(),
                                   aj.at("verb").get<std::string>(),
                                   aj.at("target").get<std::string>()});
    }
    s.instruments.push_back(std::move(inst));
  }
  return s;
}

nlohmann::json to_json(const SceneScript& s) {
  nlohmann::json instruments = nlohmann::json::array();
  for (const auto& inst : s.instruments) {
    nlohmann::json motion = nlohmann::json::array();
    for (const auto& m : inst.motion) {
      motion.push_back({{"t0", m.t0},
                        {"t1", m.t1},
                        {"from", {m.from.x, m.from.y}},
                        {"to", {m.to.x, m.to.y}},
                        {"size", {m.width, m.height}}});
    }
    nlohmann::json inter = nlohmann::json::array();
    for (const auto& a : inst.interactions) {
      inter.push_back({{"t0", a.t0}, {"t1", a.t1}, {"verb", a.verb}, {"target", a.target}});
    }
    instruments.push_back(
        {{"instrument", inst.instrument}, {"motion", motion}, {"interactions", inter}});
  }
  return {{"name", s.name},
          {"video_id", s.video_id},
          {"duration_s", s.duration_s},
          {"fps", s.fps},
          {"instruments", instruments}};
}

SceneScript load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene script " + path.string());
  try {
    return script_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::vector<std::string> validate_script(const SceneScript& s, const Vocabulary& vocab) {
  std::vector<std::string> errors;
  if (!(s.duration_s > 0.0)) errors.push_back("duration_s must be positive");
  if (!(s.fps > 0.0)) errors.push_back("fps must be positive");
  for (std::size_t i = 0; i < s.instruments.size(); ++i) {
    const auto& inst = s.instruments[i];
    const std::string where = "instrument " + std::to_string(i) + " (" + inst.instrument + ")";
    if (!vocab.contains(inst.instrument, EntityKind::instrument)) {
      errors.push_back(where + ": unknown instrument label");
    }
    for (std::size_t k = 0; k < inst.motion.size(); ++k) {
      const auto& m = inst.motion[k];
      const std::string seg = where + " motion " + std::to_string(k);
      if (!(m.t0 <= m.t1)) errors.push_back(seg + ": t0 > t1");
      if (m.t0 < 0.0 || m.t1 > s.duration_s + kEps) errors.push_back(seg + ": outside the clip");
      if (k > 0 && m.t0 < inst.motion[k - 1].t1 - kEps) {
        errors.push_back(seg + ": overlaps the previous segment");
      }
      if (!(m.width > 0.0 && m.height > 0.0)) errors.push_back(seg + ": box size must be positive");
      for (const Point& p : {m.from, m.to}) {
        const BBox b{p.x - m.width / 2, p.y - m.height / 2, p.x + m.width / 2, p.y + m.height / 2};
        if (!b.valid()) errors.push_back(seg + ": box leaves the unit square");
      }
    }
    for (std::size_t k = 0; k < inst.interactions.size(); ++k) {
      const auto& a = inst.interactions[k];
      const std::string seg = where + " interaction " + std::to_string(k);
      if (!(a.t0 <= a.t1)) errors.push_back(seg + ": t0 > t1");
      if (k > 0 && a.t0 < inst.interactions[k - 1].t1 - kEps) {
        errors.push_back(seg + ": overlaps the previous segment");
      }
      if (!vocab.contains(a.verb, EntityKind::verb)) errors.push_back(seg + ": unknown verb");
      if (!vocab.contains(a.target, EntityKind::target)) errors.push_back(seg + ": unknown target");
    }
  }
  return errors;
}

ExpectedTruth::ExpectedTruth(SceneScript script) : script_(std::move(script)) {}

ClipManifest ExpectedTruth::clip() const {
  return {script_.video_id + "_c000", script_.video_id, 0.0, script_.duration_s, script_.fps};
}

std::size_t ExpectedTruth::frame_count() const {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(script_.duration_s * script_.fps - 1e-6)));
}

double ExpectedTruth::frame_time(std::size_t k) const {
  return static_cast<double>(k) * (1.0 / script_.fps);
}

const MotionSegment* ExpectedTruth::segment_at(std::size_t instance, double t) const {
  const MotionSegment* found = nullptr;
  for (const auto& m : script_.instruments.at(instance).motion) {
    if (covers(m.t0, m.t1, t)) found = &m;
  }
  return found;
}

std::optional<Point> ExpectedTruth::centroid(std::size_t instance, double t) const {
  const auto* m = segment_at(instance, t);
  if (m == nullptr) return std::nullopt;
  if (m->t1 - m->t0 <= 0.0) return m->from;
  const double u = std::clamp((t - m->t0) / (m->t1 - m->t0), 0.0, 1.0);
  return Point{m->from.x + (m->to.x - m->from.x) * u, m->from.y + (m->to.y - m->from.y) * u};
}

std::optional<BBox> ExpectedTruth::bbox(std::size_t instance, double t) const {
  const auto* m = segment_at(instance, t);
  const auto c = centroid(instance, t);
  if (m == nullptr || !c) return std::nullopt;
  return BBox{c->x - m->width / 2, c->y - m->height / 2, c->x + m->width / 2, c->y + m->height / 2};
}

bool ExpectedTruth::visible(std::size_t instance, double t) const {
  return segment_at(instance, t) != nullptr;
}

std::optional<std::pair<std::string, std::string>> ExpectedTruth::interaction(
    std::size_t instance, double t) const {
  if (!visible(instance, t)) return std::nullopt;
  std::optional<std::pair<std::string, std::string>> found;
  for (const auto& a : script_.instruments.at(instance).interactions) {
    if (covers(a.t0, a.t1, t)) found = std::make_pair(a.verb, a.target);
  }
  return found;
}

std::vector<std::size_t> ExpectedTruth::visible_instances(double t) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < script_.instruments.size(); ++i) {
    if (visible(i, t)) out.push_back(i);
  }
  return out;
}

int ExpectedTruth::count(const std::string& instrument, double t) const {
  int n = 0;
  for (auto i : visible_instances(t)) {
    if (script_.instruments[i].instrument == instrument) ++n;
  }
  return n;
}

std::optional<std::size_t> ExpectedTruth::unique_instance(const std::string& instrument,
                                                          double t) const {
  std::optional<std::size_t> found;
  for (auto i : visible_instances(t)) {
    if (script_.instruments[i].instrument != instrument) continue;
    if (found) return std::nullopt;
    found = i;
  }
  return found;
}

std::pair<double, double> ExpectedTruth::visible_run(std::size_t instance, double t) const {
  const auto n = frame_count();
  auto k = static_cast<std::size_t>(std::llround(t * script_.fps));
  std::size_t first = k;
  std::size_t last = k;
  while (first > 0 && visible(instance, frame_time(first - 1))) --first;
  while (last + 1 < n && visible(instance, frame_time(last + 1))) ++last;
  return {frame_time(first), frame_time(last)};
}

KinematicSummary ExpectedTruth::kinematics(std::size_t instance, const QueryWindow& w,
                                           const MotionThresholds& thresholds) const {
  const auto k0 = static_cast<std::size_t>(std::llround(w.t_start * script_.fps));
  const auto k1 = static_cast<std::size_t>(std::llround(w.t_end * script_.fps));
  if (k1 <= k0) throw std::invalid_argument("window too short");
  KinematicSummary out;
  out.min_speed = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t k = k0; k < k1; ++k) {
    const double ta = frame_time(k);
    const double tb = frame_time(k + 1);
    const auto a = centroid(instance, ta);
    const auto b = centroid(instance, tb);
    if (!a || !b) throw std::invalid_argument("instance not visible across the window");
    const double v = std::hypot(b->x - a->x, b->y - a->y) / (tb - ta);
    out.min_speed = std::min(out.min_speed, v);
    out.max_speed = std::max(out.max_speed, v);
    sum += v;
  }
  out.mean_speed = sum / static_cast<double>(k1 - k0);
  out.descriptor = classify_motion(out.mean_speed, thresholds);
  return out;
}

std::vector<std::pair<double, double>> ExpectedTruth::jumps(std::size_t instance,
                                                            double max_step) const {
  std::vector<std::pair<double, double>> out;
  const auto n = frame_count();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto a = centroid(instance, frame_time(k));
    const auto b = centroid(instance, frame_time(k + 1));
    if (a && b && std::hypot(b->x - a->x, b->y - a->y) > max_step) {
      out.emplace_back(frame_time(k), frame_time(k + 1));
    }
  }
  return out;
}

RenderedScene render_scene(const SceneScript& script, const Vocabulary& vocab) {
  const auto errors = validate_script(script, vocab);
  if (!errors.empty()) {
    std::string msg = "invalid scene script";
    for (const auto& e : errors) msg += "; " + e;
    throw std::invalid_argument(msg);
  }
  const ExpectedTruth truth(script);
  RenderedScene out;
  out.clip = truth.clip();
  for (std::size_t k = 0; k < truth.frame_count(); ++k) {
    const double t = truth.frame_time(k);
    for (std::size_t i = 0; i < script.instruments.size(); ++i) {
      const auto box = truth.bbox(i, t);
      if (!box) continue;
      EventTuple tuple;
      tuple.video_id = script.video_id;
      tuple.fn = t;
      tuple.instrument = script.instruments[i].instrument;
      tuple.bbox = *box;
      if (const auto act = truth.interaction(i, t)) {
        tuple.verb = act->first;
        tuple.target = act->second;
      }
      tuple.source_frame_index = static_cast<std::int64_t>(k);
      out.tuples.push_back(std::move(tuple));
    }
  }
  std::sort(out.tuples.begin(), out.tuples.end(), tuple_less);
  return out;
}

namespace {

double time_value(const ExpectedTruth& truth, double t) {
  return round_timestamp(normalize_time(t, truth.clip()));
}

std::string segment_h(double x) { return horizontal_third(x); }
std::string segment_v(double y) { return vertical_third(y); }

std::size_t need_instance(const ExpectedTruth& truth, const std::string& name, double t) {
  const auto i = truth.unique_instance(name, t);
  if (!i) throw std::runtime_error("no unique visible " + name + " at t=" + fmt(t));
  return *i;
}

std::pair<std::string, std::string> need_interaction(const ExpectedTruth& truth, std::size_t i,
                                                     const QueryWindow& w) {
  const auto k0 = static_cast<std::size_t>(std::llround(w.t_start * truth.script().fps));
  const auto k1 = static_cast<std::size_t>(std::llround(w.t_end * truth.script().fps));
  const auto first = truth.interaction(i, truth.frame_time(k0));
  if (!first) throw std::runtime_error("instance idle in window");
  for (std::size_t k = k0; k <= k1; ++k) {
    if (truth.interaction(i, truth.frame_time(k)) != first) {
      throw std::runtime_error("interaction changes inside the window");
    }
  }
  return *first;
}

std::vector<std::size_t> window_frames(const ExpectedTruth& truth, const QueryWindow& w) {
  std::vector<std::size_t> out;
  const auto k0 = static_cast<std::size_t>(std::llround(w.t_start * truth.script().fps));
  const auto k1 = static_cast<std::size_t>(std::llround(w.t_end * truth.script().fps));
  for (std::size_t k = k0; k <= k1; ++k) out.push_back(k);
  return out;
}

}  // namespace

std::optional<Payload> analytic_gold(const ExpectedTruth& truth, const QASample& sample,
                                     const GenerationConfig& cfg) {
  const auto& q = sample.provenance.query;
  const auto t0 = [&] { return q.times_s.at(0); };
  const auto w0 = [&] { return q.windows.at(0); };
  switch (sample.subtask) {
    case Subtask::temporal_window: {
      auto vis = truth.visible_instances(t0());
      std::sort(vis.begin(), vis.end(), [&](std::size_t a, std::size_t b) {
        return truth.script().instruments[a].instrument < truth.script().instruments[b].instrument;
      });
      TemporalWindowPayload p;
      for (auto i : vis) {
        const auto [s, e] = truth.visible_run(i, t0());
        p.entries.push_back({truth.script().instruments[i].instrument, time_value(truth, s),
                             time_value(truth, e), quantize_bbox(*truth.bbox(i, s)),
                             quantize_bbox(*truth.bbox(i, e))});
      }
      return p;
    }
    case Subtask::locate: {
      const auto i = need_instance(truth, q.instruments.at(0), t0());
      return LocatePayload{q.instruments.at(0), quantize_bbox(*truth.bbox(i, t0()))};
    }
    case Subtask::closest_instrument: {
      const Point qc = to_unit(q.query_box.value()).centroid();
      std::optional<std::size_t> best;
      double best_d = 0.0;
      for (auto i : truth.visible_instances(t0())) {
        const auto c = *truth.centroid(i, t0());
        const double d = std::hypot(c.x - qc.x, c.y - qc.y);
        if (!best || d < best_d) {
          best = i;
          best_d = d;
        }
      }
      if (!best) throw std::runtime_error("no visible instance");
      return EntityPayload{truth.script().instruments[*best].instrument};
    }
    case Subtask::instrument_id: {
      std::optional<std::size_t> best;
      double best_iou = -1.0;
      for (auto i : truth.visible_instances(t0())) {
        const double v = iou(quantize_bbox(*truth.bbox(i, t0())), q.query_box.value());
        if (v > best_iou) {
          best = i;
          best_iou = v;
        }
      }
      if (!best) throw std::runtime_error("no visible instance");
      return EntityPayload{truth.script().instruments[*best].instrument};
    }
    case Subtask::frame_segment: {
      const auto i = need_instance(truth, q.instruments.at(0), t0());
      const auto c = *truth.centroid(i, t0());
      return SegmentPayload{q.instruments.at(0), segment_h(c.x), segment_v(c.y)};
    }
    case Subtask::trajectory_extreme: {
      const auto i = need_instance(truth, q.instruments.at(0), w0().t_start);
      const auto d = direction_from_string(q.direction.value()).value();
      std::optional<std::size_t> best;
      double best_key = 0.0;
      for (auto k : window_frames(truth, w0())) {
        const auto c = *truth.centroid(i, truth.frame_time(k));
        const double key = d == Direction::left    ? c.x
                           : d == Direction::right ? -c.x
                           : d == Direction::top   ? c.y
                                                   : -c.y;
        if (!best || key < best_key) {
          best = k;
          best_key = key;
        }
      }
      const double t = truth.frame_time(*best);
      return ExtremePayload{q.instruments.at(0), to_string(d), time_value(truth, t),
                            quantize_bbox(*truth.bbox(i, t))};
    }
    case Subtask::sequential_actions: {
      const auto i = need_instance(truth, q.instruments.at(0), t0());
      const auto current = truth.interaction(i, t0());
      for (auto k = static_cast<std::size_t>(std::llround(t0() * truth.script().fps)) + 1;
           k < truth.frame_count(); ++k) {
        const auto next = truth.interaction(i, truth.frame_time(k));
        if (next && next != current) {
          return InteractionPayload{q.instruments.at(0), next->first, next->second};
        }
        if (next) break;
      }
      throw std::runtime_error("no next action after t=" + fmt(t0()));
    }
    case Subtask::action_status:
    case Subtask::target_interaction: {
      const auto i = need_instance(truth, q.instruments.at(0), w0().t_start);
      const auto act = need_interaction(truth, i, w0());
      InteractionPayload p{q.instruments.at(0), std::nullopt, std::nullopt};
      if (sample.subtask == Subtask::action_status) {
        p.verb = act.first;
      } else {
        p.target = act.second;
      }
      return p;
    }
    case Subtask::relative_position: {
      const auto a = need_instance(truth, q.instruments.at(0), t0());
      const auto b = need_instance(truth, q.instruments.at(1), t0());
      const auto ca = *truth.centroid(a, t0());
      const auto cb = *truth.centroid(b, t0());
      return RelativePositionPayload{q.instruments[0], q.instruments[1],
                                     ca.x > cb.x ? "right" : "left",
                                     ca.y > cb.y ? "below" : "above"};
    }
    case Subtask::relative_change: {
      const auto w = w0();
      const auto a = need_instance(truth, q.instruments.at(0), w.t_start);
      const auto b = need_instance(truth, q.instruments.at(1), w.t_start);
      const auto dist = [&](double t) {
        const auto ca = *truth.centroid(a, t);
        const auto cb = *truth.centroid(b, t);
        return std::hypot(ca.x - cb.x, ca.y - cb.y);
      };
      const double diff = dist(w.t_end) - dist(w.t_start);
      const char* change = diff < -cfg.change_band  ? "closer"
                           : diff > cfg.change_band ? "further"
                                                    : "unchanged";
      return RelativeChangePayload{q.instruments[0], q.instruments[1], change};
    }
    case Subtask::interaction_comparison: {
      const auto w = w0();
      const auto a = need_instance(truth, q.instruments.at(0), w.t_start);
      const auto b = need_instance(truth, q.instruments.at(1), w.t_start);
      const auto ia = need_interaction(truth, a, w);
      const auto ib = need_interaction(truth, b, w);
      return InteractionComparisonPayload{q.instruments[0], q.instruments[1],
                                          ia == ib ? "same" : "different", ia.first, ia.second,
                                          ib.first, ib.second};
    }
    case Subtask::velocity: {
      const auto i = need_instance(truth, q.instruments.at(0), w0().t_start);
      const auto k = truth.kinematics(i, w0(), cfg.thresholds);
      return VelocityPayload{q.instruments.at(0), round_speed(k.min_speed),
                             round_speed(k.max_speed), round_speed(k.mean_speed),
                             to_string(k.descriptor)};
    }
    case Subtask::cot: {
      const auto w = w0();
      const auto i = need_instance(truth, q.instruments.at(0), w.t_start);
      const auto c = *truth.centroid(i, w.t_start);
      const auto k = truth.kinematics(i, w, cfg.thresholds);
      const auto act = need_interaction(truth, i, w);
      CotPayload p;
      p.instrument = q.instruments.at(0);
      p.horizontal = segment_h(c.x);
      p.vertical = segment_v(c.y);
      p.box = quantize_bbox(*truth.bbox(i, w.t_start));
      p.descriptor = to_string(k.descriptor);
      p.mean_speed = round_speed(k.mean_speed);
      p.verb = act.first;
      p.target = act.second;
      p.conclusion_instrument = p.instrument;
      p.conclusion_verb = act.first;
      p.conclusion_target = act.second;
      return p;
    }
    case Subtask::mc_existence:
    case Subtask::mc_class:
    case Subtask::mc_counting: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

void check_choices(const ExpectedTruth& truth, const QASample& s, OracleReport& r) {
  const auto add = [&](const std::string& field, const std::string& expected,
                       const std::string& actual) {
    r.discrepancies.push_back({s.sample_id, field, expected, actual});
  };
  const auto& q = s.provenance.query;
  const double t = q.times_s.at(0);
  const auto& gold = std::get<ChoicePayload>(s.gold);
  const std::set<std::string> distinct(s.options.begin(), s.options.end());
  if (distinct.size() != s.options.size()) add("options", "pairwise distinct", "duplicates");
  if (!gold.letter || gold.letter->size() != 1) {
    add("letter", "one letter", "missing");
    return;
  }
  const auto idx = static_cast<std::size_t>((*gold.letter)[0] - 'A');
  if (idx >= s.options.size() || s.options[idx] != gold.option) {
    add("letter", "index of gold option", *gold.letter);
    return;
  }
  for (std::size_t o = 0; o < s.options.size(); ++o) {
    const auto& opt = s.options[o];
    bool correct = false;
    if (s.subtask == Subtask::mc_existence) {
      correct = opt == (truth.count(q.instruments.at(0), t) > 0 ? "yes" : "no");
    } else if (s.subtask == Subtask::mc_class) {
      correct = truth.count(opt, t) > 0;
    } else {
      const int n = std::stoi(opt);
      if (n < 0) add("option", "non-negative count", opt);
      correct = n == truth.count(q.instruments.at(0), t);
    }
    if (correct != (o == idx)) {
      add("option " + std::string(1, static_cast<char>('A' + o)),
          o == idx ? "correct" : "wrong", opt);
    }
  }
}

}  // namespace

OracleReport oracle_check(const ExpectedTruth& truth, const ClipScene& scene,
                          std::span<const QASample> samples, const GenerationConfig& cfg) {
  OracleReport r;
  const auto& script = truth.script();

  // Discontinuities that the filter must keep out of every sample.
  std::vector<std::vector<std::pair<double, double>>> jumps(script.instruments.size());
  for (std::size_t i = 0; i < script.instruments.size(); ++i) {
    jumps[i] = truth.jumps(i, std::min(scene.max_step(), cfg.scene.gate));
    for (const auto& [a, b] : jumps[i]) {
      r.filtered.push_back(script.instruments[i].instrument + " step " + fmt(a) + "->" + fmt(b));
    }
  }

  // Tracks: every sample belongs to one scripted instance, labels match.
  for (const auto& tr : scene.tracks()) {
    ++r.tracks_checked;
    const std::string where = "track " + std::to_string(tr.track_id);
    std::optional<std::size_t> owner;
    for (std::size_t i = 0; i < script.instruments.size() && !owner; ++i) {
      if (script.instruments[i].instrument != tr.instrument) continue;
      const bool all = std::all_of(tr.samples.begin(), tr.samples.end(), [&](const TrackSample& s) {
        const auto c = truth.centroid(i, s.t);
        return c && std::abs(c->x - s.centroid.x) <= kEps && std::abs(c->y - s.centroid.y) <= kEps;
      });
      if (all) owner = i;
    }
    if (!owner) {
      r.discrepancies.push_back({where, "identity", "one scripted instance", "mixed or none"});
      continue;
    }
    for (const auto& b : scene.blocks(tr.track_id)) {
      for (const auto& s : tr.samples) {
        if (!b.window.contains(s.t)) continue;
        const auto act = truth.interaction(*owner, s.t);
        const std::optional<std::pair<std::string, std::string>> got =
            b.verb ? std::make_optional(std::make_pair(*b.verb, *b.target)) : std::nullopt;
        if (act != got) {
          r.discrepancies.push_back({where, "block at t=" + fmt(s.t),
                                     act ? act->first + "/" + act->second : "null",
                                     got ? got->first + "/" + got->second : "null"});
        }
      }
    }
  }

  for (const auto& s : samples) {
    ++r.samples_checked;
    const auto& q = s.provenance.query;
    // A longitudinal sample must not span a scripted discontinuity of an
    // instrument it asks about.
    for (const auto& w : q.windows) {
      for (std::size_t i = 0; i < script.instruments.size(); ++i) {
        if (std::find(q.instruments.begin(), q.instruments.end(), script.instruments[i].instrument) ==
            q.instruments.end()) {
          continue;
        }
        for (const auto& [a, b] : jumps[i]) {
          if (w.contains(a) && w.contains(b)) {
            r.discrepancies.push_back({s.sample_id, "window", "no discontinuity",
                                       "spans step at " + fmt(a)});
          }
        }
      }
    }
    if (s.core_task == CoreTask::multichoice) {
      check_choices(truth, s, r);
      continue;
    }
    std::optional<Payload> expected;
    try {
      expected = analytic_gold(truth, s, cfg);
    } catch (const std::exception& e) {
      r.discrepancies.push_back({s.sample_id, "query", "answerable from the script", e.what()});
      continue;
    }
    if (expected && *expected != s.gold) {
      r.discrepancies.push_back({s.sample_id, "gold", describe(*expected), describe(s.gold)});
    }
    // Unrounded kinematics must agree to 1e-9.
    if (s.subtask == Subtask::velocity || s.subtask == Subtask::cot) {
      const auto& w = q.windows.at(0);
      const auto i = truth.unique_instance(q.instruments.at(0), w.t_start);
      if (!i) continue;
      const auto exact = truth.kinematics(*i, w, cfg.thresholds);
      const auto got = compute_kinematics(scene.track(q.track_ids.at(0)), w, cfg.thresholds);
      const std::pair<double, double> pairs[] = {{exact.min_speed, got.min_speed},
                                                 {exact.max_speed, got.max_speed},
                                                 {exact.mean_speed, got.mean_speed}};
      for (const auto& [e, g] : pairs) {
        if (std::abs(e - g) > 1e-9) {
          r.discrepancies.push_back({s.sample_id,
                                     "kinematics [" + fmt(w.t_start) + ", " + fmt(w.t_end) + "]",
                                     fmt(e), fmt(g)});
        }
      }
    }
  }
  return r;
}

std::vector<double> crossover_times(const ExpectedTruth& truth, std::size_t a, std::size_t b,
                                    Point q) {
  std::vector<double> out;
  const auto& ma = truth.script().instruments.at(a).motion;
  const auto& mb = truth.script().instruments.at(b).motion;
  for (const auto& sa : ma) {
    for (const auto& sb : mb) {
      const double lo = std::max(sa.t0, sb.t0);
      const double hi = std::min(sa.t1, sb.t1);
      if (lo > hi) continue;
      // p(t) = p0 + v t in absolute time.
      const auto lin = [](const MotionSegment& m, Point& p0, Point& v) {
        const double dt = m.t1 - m.t0;
        v = dt > 0 ? Point{(m.to.x - m.from.x) / dt, (m.to.y - m.from.y) / dt} : Point{0, 0};
        p0 = {m.from.x - v.x * m.t0, m.from.y - v.y * m.t0};
      };
      Point a0, va, b0, vb;
      lin(sa, a0, va);
      lin(sb, b0, vb);
      const Point da{a0.x - q.x, a0.y - q.y};
      const Point db{b0.x - q.x, b0.y - q.y};
      const double A = (va.x * va.x + va.y * va.y) - (vb.x * vb.x + vb.y * vb.y);
      const double B = 2.0 * ((da.x * va.x + da.y * va.y) - (db.x * vb.x + db.y * vb.y));
      const double C = (da.x * da.x + da.y * da.y) - (db.x * db.x + db.y * db.y);
      std::vector<double> roots;
      if (std::abs(A) < 1e-15) {
        if (std::abs(B) > 1e-15) roots.push_back(-C / B);
      } else {
        const double disc = B * B - 4 * A * C;
        if (disc >= 0) {
          const double sq = std::sqrt(disc);
          roots.push_back((-B - sq) / (2 * A));
          roots.push_back((-B + sq) / (2 * A));
        }
      }
      for (double t : roots) {
        if (t >= lo - kEps && t <= hi + kEps) out.push_back(t);
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double x, double y) { return std::abs(x - y) <= kEps; }),
            out.end());
  return out;
}

namespace {

Point step_towards(Rng& rng, Point from, double max_dist, double lo_x, double hi_x, double lo_y,
                   double hi_y) {
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double dist = rng.uniform(0.0, max_dist);
  return {std::clamp(from.x + dist * std::cos(angle), lo_x, hi_x),
          std::clamp(from.y + dist * std::sin(angle), lo_y, hi_y)};
}

// Integer second in [lo, hi].
double pick_time(Rng& rng, double lo, double hi) {
  const auto a = static_cast<long long>(std::ceil(lo));
  const auto b = static_cast<long long>(std::floor(hi));
  if (b <= a) return static_cast<double>(a);
  return static_cast<double>(a + static_cast<long long>(rng.index(static_cast<std::size_t>(b - a + 1))));
}

}  // namespace

SceneScript random_script(std::uint64_t seed, const Vocabulary& vocab,
                          const RandomScriptOptions& opt) {
  Rng rng(seed);
  SceneScript s;
  s.name = "random_" + std::to_string(seed);
  s.video_id = "synth_" + std::to_string(seed % 1000000);
  s.duration_s = opt.duration_s;
  s.fps = opt.fps;
  const double last = std::ceil(opt.duration_s * opt.fps - 1e-6) / opt.fps - 1.0 / opt.fps;

  std::vector<std::string> classes = vocab.instruments();
  rng.shuffle(std::span(classes));
  const int n = opt.min_instruments +
                static_cast<int>(rng.index(static_cast<std::size_t>(opt.max_instruments - opt.min_instruments + 1)));
  const bool duplicate = n >= 2 && rng.uniform() < opt.duplicate_class_prob;

  for (int i = 0; i < n; ++i) {
    ScriptedInstrument inst;
    inst.instrument = duplicate && i == 1 ? classes[0] : classes[static_cast<std::size_t>(i)];
    const double w = rng.uniform(0.05, 0.2);
    const double h = rng.uniform(0.05, 0.2);
    double lo_x = w / 2 + 0.01, hi_x = 1.0 - w / 2 - 0.01;
    const double lo_y = h / 2 + 0.01, hi_y = 1.0 - h / 2 - 0.01;
    double speed = opt.max_speed;
    if (duplicate && (i == 0 || i == 1)) {
      // Keep same-class instances far apart so identities are unambiguous.
      if (i == 0) hi_x = 0.25;
      else lo_x = 0.75;
      speed = std::min(speed, 0.1);
    }

    // Visible runs.
    std::vector<std::pair<double, double>> runs;
    const double start = rng.uniform() < 0.6 ? 0.0 : pick_time(rng, 0.0, last / 4);
    const double end = rng.uniform() < 0.6 ? last : pick_time(rng, 3 * last / 4, last);
    if (rng.uniform() < opt.absence_prob && end - start > 12.0) {
      const double gap_start = pick_time(rng, start + 4.0, end - 8.0);
      const double gap_len = 2.0 + static_cast<double>(rng.index(3));
      runs.emplace_back(start, gap_start);
      runs.emplace_back(gap_start + gap_len, end);
    } else {
      runs.emplace_back(start, end);
    }

    Point pos{rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)};
    for (const auto& [r0, r1] : runs) {
      double t = r0;
      while (t < r1 - kEps) {
        const double t_next = std::min(r1, t + 3.0 + static_cast<double>(rng.index(8)));
        const bool still = rng.uniform() < 0.3;
        const Point to =
            still ? pos : step_towards(rng, pos, speed * (t_next - t), lo_x, hi_x, lo_y, hi_y);
        inst.motion.push_back({t, t_next, pos, to, w, h});
        pos = to;
        t = t_next;
      }
      if (r1 - r0 <= kEps) inst.motion.push_back({r0, r1, pos, pos, w, h});

      // Interaction blocks inside the run, separated by short idle gaps.
      double a = r0;
      while (a < r1 - kEps) {
        const double b = std::min(r1, a + 2.0 + static_cast<double>(rng.index(7)));
        if (rng.uniform() < 0.8) {
          inst.interactions.push_back({a, b, vocab.verbs()[rng.index(vocab.verbs().size())],
                                       vocab.targets()[rng.index(vocab.targets().size())]});
        }
        a = b + (rng.uniform() < 0.3 ? 1.0 : 1.0 / opt.fps);
      }
    }
    s.instruments.push_back(std::move(inst));
  }
  return s;
}

}  // namespace stqa
