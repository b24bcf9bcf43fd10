#include "maskrl/ablate.hpp"
#include "maskrl/config.hpp"
#include "maskrl/diffusion.hpp"
#include "maskrl/likelihood.hpp"
#include "maskrl/objectives.hpp"
#include "maskrl/policy.hpp"
#include "maskrl/rewards.hpp"
#include "maskrl/rollout.hpp"
#include "maskrl/tasks.hpp"
#include "maskrl/train.hpp"
#include "maskrl/verify.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace maskrl;

namespace {

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
  std::vector<std::vector<double>> rows(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    rows[i].assign(m.row(i), m.row(i) + m.cols);
  return rows;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols)
      throw std::invalid_argument("ragged probability rows");
    std::copy(rows[i].begin(), rows[i].end(), m.row(i));
  }
  return m;
}

py::dict group_to_dict(const objectives::Group& g) {
  py::dict d;
  d["prompt"] = g.x;
  py::list samples;
  for (const auto& s : g.samples) {
    py::dict e;
    e["y"] = s.y;
    e["key_reward"] = s.key_reward;
    e["reward"] = s.reward;
    e["source"] = objectives::source_to_string(s.source);
    e["unmask_step"] = s.trajectory.unmask_step;
    samples.append(e);
  }
  d["samples"] = samples;
  return d;
}

}  // namespace

PYBIND11_MODULE(_maskrl, m) {
  m.doc() = "masked-diffusion sequence model post-training core";

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next_u64", &Rng::next_u64)
      .def("next_double", &Rng::next_double)
      .def("next_below", &Rng::next_below)
      .def("split", &Rng::split);

  py::class_<Vocabulary>(m, "Vocabulary")
      .def_static("standard", &Vocabulary::standard)
      .def_static("generic", &Vocabulary::generic)
      .def_static("from_json", &Vocabulary::from_json)
      .def("to_json", &Vocabulary::to_json)
      .def("size", &Vocabulary::size)
      .def("id", &Vocabulary::id)
      .def("name", &Vocabulary::name)
      .def("digit", &Vocabulary::digit)
      .def("coord", &Vocabulary::coord)
      .def("detokenize", &Vocabulary::detokenize)
      .def_readonly("mask_id", &Vocabulary::mask_id)
      .def_readonly("pad_id", &Vocabulary::pad_id)
      .def_readonly("fim_id", &Vocabulary::fim_id)
      .def_readonly("think_open_id", &Vocabulary::think_open_id)
      .def_readonly("think_close_id", &Vocabulary::think_close_id)
      .def_readonly("answer_open_id", &Vocabulary::answer_open_id)
      .def_readonly("answer_close_id", &Vocabulary::answer_close_id);

  py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
      .def(py::init([](int steps) { return DiffusionSchedule{steps}; }),
           py::arg("steps"))
      .def_readonly("steps", &DiffusionSchedule::steps)
      .def("t_of", &DiffusionSchedule::t_of);

  m.def("forward_mask",
        [](const Vocabulary& v, const Sequence& y0, double t, Rng& rng) {
          return diffusion::forward_mask(v, y0, t, rng);
        });
  m.def("complementary_pair",
        [](const Vocabulary& v, const Sequence& y0, double t1, Rng& rng) {
          return diffusion::complementary_pair(v, y0, t1, rng);
        });
  m.def("posterior_step",
        [](const Vocabulary& v, const Sequence& y_t,
           const std::vector<std::vector<double>>& probs, double t, double s,
           Rng& rng) {
          return diffusion::posterior_step(v, y_t, rows_to_matrix(probs), t,
                                           s, rng);
        });
  m.def("mask_fraction_to_timestep", &diffusion::mask_fraction_to_timestep);

  py::class_<policy::PolicyConfig>(m, "PolicyConfig")
      .def(py::init([](std::size_t vocab_size, std::size_t dim,
                       std::size_t max_ctx) {
             policy::PolicyConfig c;
             c.vocab_size = vocab_size;
             c.dim = dim;
             c.max_ctx = max_ctx;
             return c;
           }),
           py::arg("vocab_size"), py::arg("dim") = 32,
           py::arg("max_ctx") = 32)
      .def_readwrite("vocab_size", &policy::PolicyConfig::vocab_size)
      .def_readwrite("dim", &policy::PolicyConfig::dim)
      .def_readwrite("max_ctx", &policy::PolicyConfig::max_ctx);

  py::class_<policy::PolicyParams>(m, "PolicyParams")
      .def_static("init",
                  [](const policy::PolicyConfig& cfg, std::uint64_t seed) {
                    Rng rng(seed);
                    return policy::PolicyParams::init(cfg, rng);
                  })
      .def("snapshot", [](const policy::PolicyParams& p) {
        return policy::snapshot(p);
      });

  m.def("predict",
        [](const policy::PolicyParams& p, const Sequence& y_t,
           const Sequence& x) { return matrix_to_rows(policy::predict(p, y_t, x)); });
  m.def("token_logprob_sum",
        [](const policy::PolicyParams& p, const Vocabulary& v,
           const Sequence& y, const Sequence& y_t, const Sequence& x,
           const MaskPattern& positions) {
          return policy::token_logprob_sum(p, v, y, y_t, x, positions);
        });

  m.def("generate",
        [](const policy::PolicyParams& p, const Vocabulary& v,
           const Sequence& x, const Sequence& init,
           const DiffusionSchedule& schedule, Rng& rng) {
          auto traj = diffusion::generate(rollout::make_predictor(p), v, x,
                                          init, schedule, rng);
          py::dict d;
          d["y0"] = traj.y0;
          d["unmask_step"] = traj.unmask_step;
          d["total_steps"] = traj.total_steps;
          return d;
        });
  m.def("reconstruct",
        [](const Sequence& y0, const std::vector<int>& unmask_step,
           int total_steps, const Vocabulary& v, int s) {
          diffusion::Trajectory t{y0, unmask_step, total_steps};
          return rollout::reconstruct(t, v, s);
        });

  m.def("estimate_loglik",
        [](const std::string& estimator, const policy::PolicyParams& p,
           const Vocabulary& v, const Sequence& y, const Sequence& x,
           Rng& rng) {
          return likelihood::estimate_loglik(
                     likelihood::estimator_from_string(estimator), p, v, y, x,
                     rng)
              .value;
        });
  m.def("exact_expected",
        [](const std::string& estimator, const policy::PolicyParams& p,
           const Vocabulary& v, const Sequence& y, const Sequence& x) {
          return likelihood::exact_expected(
              likelihood::estimator_from_string(estimator), p, v, y, x);
        });

  m.def("grpo_advantages", &objectives::grpo_advantages);
  m.def("bon_weights", &objectives::bon_weights);
  m.def("aggregate", &objectives::aggregate);

  m.def("parse_response", [](const Vocabulary& v, const Sequence& y) {
    const auto p = rollout::parse_response(v, y);
    py::dict d;
    d["think"] = p.think;
    d["answer"] = p.answer;
    d["well_formed"] = p.well_formed;
    return d;
  });

  m.def("correctness_reward", &rewards::correctness_reward);
  m.def("interval_iou", &rewards::interval_iou);
  m.def("iou_reward", &rewards::iou_reward);
  m.def("format_reward", &rewards::format_reward);
  m.def("repetition_penalty", &rewards::repetition_penalty);

  m.def("sample_group",
        [](const policy::PolicyParams& p, const Vocabulary& v,
           const Sequence& x, int n, const DiffusionSchedule& schedule,
           std::size_t max_len, Rng& rng) {
          return group_to_dict(
              rollout::sample_group(p, v, x, n, schedule, max_len, rng));
        });

  m.def("train", [](const std::string& config_json) {
    harness::RunConfig cfg = harness::config_from_json_text(config_json);
    harness::Trainer trainer(cfg);
    const auto metrics = trainer.run();
    py::dict d;
    d["metrics_path"] = metrics;
    d["checkpoint_path"] = cfg.checkpoint_path;
    d["steps"] = trainer.step();
    return d;
  });

  m.def("verify", [] {
    const auto results = harness::verify();
    py::list out;
    for (const auto& r : results) {
      py::dict d;
      d["suite"] = r.name;
      d["passed"] = r.passed;
      d["seconds"] = r.seconds;
      d["detail"] = r.detail;
      out.append(d);
    }
    return out;
  });
}
