#include "bevguard/harness/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include "bevguard/attack/perturbation.hpp"
#include "bevguard/attack/schedule.hpp"
#include "bevguard/attack/segmentation.hpp"
#include "bevguard/core/error.hpp"
#include "bevguard/core/rng.hpp"
#include "bevguard/scene/fusion.hpp"
#include "bevguard/scene/sensor.hpp"
#include "bevguard/scene/world.hpp"
#include "bevguard/spatial/consistency.hpp"
#include "bevguard/temporal/kalman.hpp"

namespace bevguard::harness {

using nlohmann::json;

namespace {

// Independent random streams per role.
enum Stream : std::uint64_t { kWorld = 1, kSensor, kSchedule, kAttack, kPlacement };

}  // namespace

double FlowStats::unmatched_attacked_mean() const {
  return scored_attacked ? static_cast<double>(unmatched_attacked) / static_cast<double>(scored_attacked) : 0.0;
}

double FlowStats::unmatched_clean_mean() const {
  return scored_clean ? static_cast<double>(unmatched_clean) / static_cast<double>(scored_clean) : 0.0;
}

json EvalReport::summary() const {
  return {{"variant", variant},
          {"attack", attack},
          {"seed", seed},
          {"frames", frames},
          {"ap50", ap50},
          {"ap70", ap70},
          {"precision", detection.precision()},
          {"recall", detection.recall()},
          {"f1", detection.f1()},
          {"fdr", detection.fdr()},
          {"attacked_messages", attacked_messages},
          {"quarantines", quarantines},
          {"interpolations", interpolations},
          {"flushes", flushes},
          {"throughput_fps", throughput_fps},
          {"flow_ltr_touched", flows.touched_mean()},
          {"flow_ltr_clean", flows.clean_mean()},
          {"unmatched_attacked", flows.unmatched_attacked_mean()},
          {"unmatched_clean", flows.unmatched_clean_mean()}};
}

std::vector<Vec2> place_agents(const ScenarioConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kPlacement));
  const double lo = cfg.scene.agent_margin;
  const double hi = cfg.scene.grid_size - cfg.scene.agent_margin;
  const double min_sep = 0.25 * (hi - lo);
  std::vector<Vec2> out;
  for (int a = 0; a < cfg.scene.n_agents; ++a) {
    Vec2 p{rng.uniform(lo, hi), rng.uniform(lo, hi)};
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const bool clear = std::all_of(out.begin(), out.end(), [&](Vec2 q) { return distance(p, q) >= min_sep; });
      if (clear) break;
      p = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
    }
    out.push_back(p);
  }
  return out;
}

std::vector<int> choose_attackers(const ScenarioConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, kPlacement, 1));
  std::vector<int> pool;
  for (int a = 0; a < cfg.scene.n_agents; ++a) {
    if (a != cfg.scene.ego) pool.push_back(a);
  }
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  const int m = std::clamp(cfg.attack.n_malicious, 0, static_cast<int>(pool.size()));
  std::vector<int> out(pool.begin(), pool.begin() + m);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool attack_enabled(const ScenarioConfig& cfg) {
  const Variant v = cfg.defense.variant;
  return cfg.attack.kind != AttackKind::none && v != Variant::upper && v != Variant::lower &&
         cfg.attack.n_malicious > 0 && cfg.attack.attack_ratio > 0.0;
}

struct CollabState {
  int agent = -1;
  temporal::FlowCache cache;
};

}  // namespace

EvalReport run_scenario(const ScenarioConfig& cfg, const Resources& res, RunMode mode, std::ostream* trace) {
  validate(cfg);
  const auto t_start = std::chrono::steady_clock::now();
  const Variant variant = cfg.defense.variant;
  const bool scored = variant == Variant::gcp || variant == Variant::gcp_s || variant == Variant::gcp_t ||
                      variant == Variant::baseline;
  const bool temporal_on = uses_temporal(variant);
  const bool collecting = res.flow_sink != nullptr;
  const bool caching = temporal_on || (collecting && scored);
  const bool deciding = scored && mode == RunMode::evaluate;
  if (temporal_on && !res.model) throw ConfigError("defense.model_path: variant needs a trained LSTM-AE model");
  if (deciding && !res.calibration) throw ConfigError("defense.calibration_path: variant needs a calibration set");
  if (deciding && res.calibration->variant != to_string(variant)) {
    throw ConfigError("defense.calibration_path: calibration was built for variant " + res.calibration->variant);
  }

  const GridSpec grid = cfg.grid();
  scene::SensorModel sensor = cfg.scene.sensor;
  sensor.grid = grid;
  scene::WorldConfig wcfg;
  wcfg.bounds = {static_cast<double>(cfg.scene.grid_size), static_cast<double>(cfg.scene.grid_size)};
  wcfg.n_objects = cfg.scene.n_objects;
  wcfg.speed_min = cfg.scene.speed_min;
  wcfg.speed_max = cfg.scene.speed_max;
  wcfg.n_occluders = cfg.scene.n_occluders;

  Rng world_rng(derive_seed(cfg.seed, kWorld));
  scene::WorldState world = scene::make_world(wcfg, world_rng);

  const auto positions = place_agents(cfg);
  std::vector<scene::AgentPose> poses;
  std::vector<Rng> sensor_rng;
  for (int a = 0; a < cfg.scene.n_agents; ++a) {
    poses.push_back({a, positions[a], cfg.scene.sensing_radius, true});
    sensor_rng.emplace_back(derive_seed(cfg.seed, kSensor, static_cast<std::uint64_t>(a)));
  }
  const int ego = cfg.scene.ego;

  // Attack process.
  const bool attacking = attack_enabled(cfg);
  const auto attackers = choose_attackers(cfg);
  attack::AttackSchedule schedule;
  if (attacking) {
    attack::AttackProcessParams ap;
    ap.mode = cfg.attack.mode;
    ap.n_agents = cfg.scene.n_agents;
    ap.horizon = cfg.frames;
    ap.n_malicious = static_cast<int>(attackers.size());
    ap.attack_ratio = cfg.attack.attack_ratio;
    ap.alloc_std = cfg.attack.alloc_std;
    ap.propagation_rate = cfg.attack.propagation_rate;
    ap.seed = cfg.seed;
    ap.attackers = attackers;
    Rng srng(derive_seed(cfg.seed, kSchedule));
    try {
      schedule = attack::make_schedule(ap, srng);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("attack: ") + e.what());
    }
  }
  std::vector<Rng> attack_rng;
  for (int a = 0; a < cfg.scene.n_agents; ++a) {
    attack_rng.emplace_back(derive_seed(cfg.seed, kAttack, static_cast<std::uint64_t>(a)));
  }
  const int refresh = attack::mask_refresh_period(cfg.attack.sim_fps, cfg.attack.mask_update_fps);
  std::optional<attack::BlindMask> mask;
  int mask_age = 0;
  attack::SegmentationParams seg{cfg.attack.k_base, cfg.attack.gamma_d, grid};

  // Defense state.
  std::vector<CollabState> collabs;
  for (int a = 0; a < cfg.scene.n_agents; ++a) {
    if (a != ego) collabs.push_back({a, temporal::FlowCache(cfg.defense.temporal)});
  }
  // The calibration set fixes the tested statistic, including its omega weights.
  stattest::CalibrationSet cal;
  if (deciding) cal = *res.calibration;
  const stattest::ScoreWeights weights = cal.weights;
  stattest::TrustState trust;
  spatial::MatchCostParams match{cfg.defense.temporal.phi, {"vehicle"}};
  const scene::ConfidenceMap uniform_map{Grid<double>(grid, 1.0)};

  EvalReport report;
  report.variant = to_string(variant);
  report.attack = attacking ? to_string(cfg.attack.kind) : "none";
  report.seed = cfg.seed;
  report.frames = cfg.frames;
  ApAccumulator ap_acc;

  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0) world = scene::step_world(world, cfg.scene.process_noise, world_rng, wcfg.boundary);
    world.time_index = t;

    std::vector<scene::DetectionSet> clean(static_cast<std::size_t>(cfg.scene.n_agents));
    for (int a = 0; a < cfg.scene.n_agents; ++a) {
      clean[a] = scene::sense_detections(world, poses[a], sensor, sensor_rng[a]);
    }
    const scene::ConfidenceMap ego_map =
        scored ? scene::confidence_map(world, poses[ego], sensor) : scene::ConfidenceMap{Grid<double>(grid, 0.0)};
    const scene::DetectionSet truth = scene::ground_truth(world, grid);

    // Attackers craft their messages from everything broadcast in the clean round.
    std::vector<scene::DetectionSet> msgs = clean;
    std::vector<bool> attacked(static_cast<std::size_t>(cfg.scene.n_agents), false);
    std::vector<std::size_t> edit_count(static_cast<std::size_t>(cfg.scene.n_agents), 0);
    bool mask_refreshed = false;
    if (attacking && schedule.frame_count(t) > 0) {
      std::vector<scene::DetectionSet> others;
      for (int a = 0; a < cfg.scene.n_agents; ++a) {
        if (a != ego) others.push_back(clean[a]);
      }
      const scene::DetectionSet y_collab = scene::fuse_late(clean[ego], others, cfg.defense.nms_iou);
      if (cfg.attack.kind == AttackKind::bac && (!mask || mask_age >= refresh)) {
        const auto dd = attack::differential_detect(clean[ego], y_collab, cfg.attack.match_iou);
        mask = attack::segment_blind_regions(dd.victim, dd.non_victim, seg);
        mask_age = 0;
        mask_refreshed = true;
      }
      for (int a : attackers) {
        if (!schedule.is_active(t, a)) continue;
        attack::SearchParams search = cfg.attack.search;
        search.injection = {positions[a], cfg.scene.sensing_radius, sensor, {4.5, 2.0}};
        attack::PerturbationPlan plan;
        if (cfg.attack.kind == AttackKind::bac) {
          if (!mask) continue;
          plan = attack::optimize_bac(clean[a], y_collab, *mask, cfg.attack.budget, search, attack_rng[a]);
        } else {
          plan = attack::baseline_attack(clean[a], y_collab, cfg.attack.budget, search, attack_rng[a]);
        }
        if (plan.empty()) continue;
        msgs[a] = attack::apply_plan(clean[a], plan);
        attacked[a] = true;
        edit_count[a] = plan.edits.size();
        ++report.attacked_messages;
      }
    }
    if (mask) ++mask_age;

    // Defense: score every collaborator against the ego view.
    std::vector<json> records;
    std::vector<stattest::AgentVerdict> verdicts;
    std::vector<temporal::FlowSets> flow_sets(collabs.size());
    std::vector<scene::DetectionSet> pair_fused(collabs.size());
    for (std::size_t ci = 0; ci < collabs.size(); ++ci) {
      const int a = collabs[ci].agent;
      json rec{{"type", "pair"}, {"frame", t}, {"ego", ego}, {"agent", a},
               {"designated", std::find(attackers.begin(), attackers.end(), a) != attackers.end()},
               {"scheduled", attacking && schedule.is_active(t, a)}, {"attacked", attacked[a]},
               {"edits", edit_count[a]}, {"n_boxes", msgs[a].size()}};
      stattest::AgentVerdict v;
      v.agent = a;
      if (scored) {
        const scene::DetectionSet own{msgs[a]};
        pair_fused[ci] = scene::fuse_late(clean[ego], std::span(&own, 1), cfg.defense.nms_iou);
        const auto& c_map = variant == Variant::baseline ? uniform_map : ego_map;
        const auto sp = spatial::csc_loss(clean[ego], pair_fused[ci], c_map, match);
        v.l_csc = sp.l_csc;
        rec["l_csc"] = sp.l_csc;
        rec["csc_terms"] = sp.per_pair_terms;
        if (temporal_on) {
          auto& cache = collabs[ci].cache;
          const auto o_set = temporal::select_low_confidence(pair_fused[ci], clean[ego], ego_map, cfg.defense.temporal);
          rec["n_low_conf"] = o_set.size();
          if (cache.ready()) {
            flow_sets[ci] = temporal::bfm_chain_match(o_set, cache);
            double ta = cfg.defense.temporal.kappa_p * static_cast<double>(flow_sets[ci].unmatched.size());
            json ltr = json::array();
            for (const auto& f : flow_sets[ci].candidates) {
              const double l = temporal::flow_l_tr(f, *res.model);
              ta += l;
              ltr.push_back(l);
              if (f.touched()) {
                report.flows.touched_ltr_sum += l;
                ++report.flows.touched_count;
              } else {
                report.flows.clean_ltr_sum += l;
                ++report.flows.clean_count;
              }
            }
            if (attacked[a]) {
              report.flows.unmatched_attacked += flow_sets[ci].unmatched.size();
              ++report.flows.scored_attacked;
            } else {
              report.flows.unmatched_clean += flow_sets[ci].unmatched.size();
              ++report.flows.scored_clean;
            }
            v.l_ta = ta;
            v.temporal = true;
            rec["candidate_ltr"] = ltr;
            rec["n_candidates"] = flow_sets[ci].candidates.size();
            rec["n_unmatched"] = flow_sets[ci].unmatched.size();
          }
          rec["l_ta"] = v.l_ta;
          rec["temporal"] = v.temporal;
          rec["cache_size"] = cache.size();
        }
        report.scores.push_back({t, a, {v.l_csc, v.l_ta, v.temporal}, attacked[a]});
      }
      verdicts.push_back(v);
      records.push_back(std::move(rec));
    }

    // Decision.
    std::vector<bool> rejected(collabs.size(), false);
    if (deciding) {
      if (uses_conformal(variant)) {
        std::vector<double> p;
        for (auto& v : verdicts) {
          v.l_st = stattest::st_score({v.l_csc, v.l_ta, v.temporal}, cal.normalizer, weights);
          v.p_value = stattest::conformal_p(v.l_st, cal);
          p.push_back(v.p_value);
        }
        const auto bh = stattest::bh_select(p, cfg.defense.alpha_bh);
        rejected = bh.rejected;
      } else {
        for (std::size_t ci = 0; ci < verdicts.size(); ++ci) {
          verdicts[ci].l_st = verdicts[ci].l_csc;
          rejected[ci] = verdicts[ci].l_csc > cal.alpha_spatial;
        }
      }
    }
    stattest::AnomalyVerdict verdict;
    verdict.frame = t;
    verdict.alpha_bh = cfg.defense.alpha_bh;
    for (std::size_t ci = 0; ci < verdicts.size(); ++ci) {
      verdicts[ci].rejected = rejected[ci];
      verdict.agents.push_back(verdicts[ci]);
    }
    trust = stattest::update_trust(std::move(trust), verdict);

    if (collecting && scored) {
      for (std::size_t ci = 0; ci < collabs.size(); ++ci) {
        auto& cache = collabs[ci].cache;
        if (!cache.ready()) continue;
        auto sets = temporal::bfm_chain_match(pair_fused[ci], cache);
        for (auto& f : sets.candidates) res.flow_sink->push_back(std::move(f));
      }
    }

    // Flow caches: accepted messages are cached, quarantined ones become gaps.
    if (caching) {
      for (std::size_t ci = 0; ci < collabs.size(); ++ci) {
        auto& cache = collabs[ci].cache;
        if (rejected[ci]) {
          const auto outcome = temporal::handle_gap(cache, t, cfg.defense.kalman);
          const char* label = outcome == temporal::GapOutcome::interpolated ? "interpolated"
                              : outcome == temporal::GapOutcome::flushed   ? "flushed"
                                                                            : "skipped";
          records[ci]["gap"] = label;
          report.interpolations += outcome == temporal::GapOutcome::interpolated;
          report.flushes += outcome == temporal::GapOutcome::flushed;
        } else {
          cache.push_observed(std::move(pair_fused[ci]));
        }
      }
    }

    // Final fusion at the ego.
    scene::DetectionSet fused;
    if (variant == Variant::lower) {
      fused = clean[ego];
    } else {
      std::vector<scene::DetectionSet> accepted;
      for (std::size_t ci = 0; ci < collabs.size(); ++ci) {
        if (trust.quarantined(collabs[ci].agent, t)) continue;
        accepted.push_back(msgs[collabs[ci].agent]);
      }
      fused = scene::fuse_late(clean[ego], accepted, cfg.defense.nms_iou);
    }
    ap_acc.add_frame(fused, truth);

    std::vector<bool> malicious;
    for (const auto& c : collabs) malicious.push_back(attacked[c.agent]);
    if (scored) report.detection.add_frame(malicious, rejected);
    for (bool r : rejected) report.quarantines += r;

    if (trace) {
      for (std::size_t ci = 0; ci < records.size(); ++ci) {
        auto& rec = records[ci];
        if (scored) {
          rec["l_st"] = verdicts[ci].l_st;
          rec["p_value"] = verdicts[ci].p_value;
          rec["rejected"] = rejected[ci];
        }
        *trace << rec.dump() << '\n';
      }
      json frame_rec{{"type", "frame"},        {"frame", t},
                     {"n_truth", truth.size()}, {"n_fused", fused.size()},
                     {"mask_refreshed", mask_refreshed},
                     {"blind_cells", mask ? mask->blind_count() : 0}};
      *trace << frame_rec.dump() << '\n';
    }
  }

  report.ap50 = ap_acc.ap(0.5);
  report.ap70 = ap_acc.ap(0.7);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  report.throughput_fps = secs > 0.0 ? cfg.frames / secs : 0.0;
  return report;
}

}  // namespace bevguard::harness
