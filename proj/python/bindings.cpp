#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "eelsim/canbus.hpp"
#include "eelsim/error.hpp"
#include "eelsim/gait.hpp"
#include "eelsim/kinematics.hpp"
#include "eelsim/plant.hpp"
#include "eelsim/report.hpp"
#include "eelsim/simulation.hpp"
#include "eelsim/teleop.hpp"

namespace py = pybind11;
using namespace eelsim;

namespace {

py::tuple joint_tuple(const kinematics::VertebraJointState& j) { return py::make_tuple(j.yaw, j.pitch, j.roll); }

std::vector<kinematics::VertebraJointState> joints_from(const std::vector<std::array<double, 3>>& rows) {
    std::vector<kinematics::VertebraJointState> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r[0], r[1], r[2]});
    return out;
}

py::list pose_list(const kinematics::BodyPose& pose) {
    py::list out;
    for (const auto& f : pose) {
        const auto& q = f.orientation;
        out.append(py::make_tuple(py::make_tuple(f.position.x(), f.position.y(), f.position.z()),
                                  py::make_tuple(q.w(), q.x(), q.y(), q.z())));
    }
    return out;
}

gait::GaitParams gait_params(double amp_yaw, double amp_pitch, double frequency, double phase_gradient,
                             bool retrograde, double bias_yaw, double bias_pitch) {
    gait::GaitParams p;
    p.amp_yaw = amp_yaw;
    p.amp_pitch = amp_pitch;
    p.frequency = frequency;
    p.phase_gradient = phase_gradient;
    p.direction = retrograde ? gait::WaveDirection::retrograde : gait::WaveDirection::progressive;
    p.bias_yaw = bias_yaw;
    p.bias_pitch = bias_pitch;
    return p;
}

py::dict gait_dict(const gait::GaitParams& p) {
    py::dict d;
    d["amp_yaw"] = p.amp_yaw;
    d["amp_pitch"] = p.amp_pitch;
    d["frequency"] = p.frequency;
    d["phase_gradient"] = p.phase_gradient;
    d["retrograde"] = p.direction == gait::WaveDirection::retrograde;
    d["bias_yaw"] = p.bias_yaw;
    d["bias_pitch"] = p.bias_pitch;
    d["seq"] = p.seq;
    return d;
}

py::dict metrics_dict(const sim::RunMetrics& m) {
    py::dict d;
    d["simulated_s"] = m.simulated_s;
    d["vertebra_count"] = m.vertebra_count;
    d["local_nodes"] = m.local_nodes;
    d["seed"] = m.seed;
    d["saturations"] = m.saturations;
    d["max_sync_error_s"] = m.max_sync_error;
    d["mean_bus_load"] = m.mean_bus_load;
    d["max_window_load"] = m.max_window_load;
    d["frames"] = m.frames;
    d["consumed_wh"] = m.consumed_wh;
    d["remaining_wh"] = m.remaining_wh;
    d["mean_actuator_power_w"] = m.mean_actuator_power;
    d["mean_electronics_power_w"] = m.mean_electronics_power;
    d["propulsion_mean_thrust_n"] = m.propulsion.mean_thrust;
    d["propulsion_mean_power_w"] = m.propulsion.mean_power;
    return d;
}

sim::Scenario parse_scenario(const std::string& text) {
    std::istringstream in(text);
    return sim::Scenario::parse(in);
}

}  // namespace

PYBIND11_MODULE(_eelsim, m) {
    m.doc() = "Eel robot digital twin";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<TopologyError>(m, "TopologyError", base.ptr());
    py::register_exception<InvalidFrame>(m, "InvalidFrame", base.ptr());

    // kinematics
    m.def("motors_from_joints", [](double yaw, double pitch, double roll, double gear_ratio) {
        const auto a = kinematics::motors_from_joints({yaw, pitch, roll}, gear_ratio);
        return py::make_tuple(a.m1, a.m2, a.m3);
    }, py::arg("yaw"), py::arg("pitch"), py::arg("roll"), py::arg("gear_ratio") = 1.0);
    m.def("joints_from_motors", [](double m1, double m2, double m3, double gear_ratio) {
        return joint_tuple(kinematics::joints_from_motors({m1, m2, m3, gear_ratio}));
    }, py::arg("m1"), py::arg("m2"), py::arg("m3"), py::arg("gear_ratio") = 1.0);
    m.def("forward_kinematics", [](const std::vector<std::array<double, 3>>& joints) {
        const auto j = joints_from(joints);
        return pose_list(kinematics::forward_kinematics(j, kinematics::BodyDimensions{}, j.size()));
    }, py::arg("joints"), "Head, one frame per vertebra, tail tip: ((x, y, z), (w, x, y, z)).");
    m.def("straight_length", [](std::size_t n) { return kinematics::BodyDimensions{}.straight_length(n); },
          py::arg("vertebra_count") = kinematics::kDefaultVertebraCount);
    m.def("skin_fiber_strain", [](double yaw) {
        const kinematics::VertebraGeometry geom;
        const auto s = kinematics::skin_fiber_strain(yaw, geom, kinematics::FiberRadii::prototype_skin(geom));
        return py::make_tuple(s.outer, s.inner);
    }, py::arg("yaw"));
    m.def("displaced_volume", [] { return kinematics::displaced_volume(kinematics::VertebraGeometry{}); });

    // gait
    m.def("setpoint", [](std::size_t index, double t, double amp_yaw, double amp_pitch, double frequency,
                         double phase_gradient, bool retrograde, double bias_yaw, double bias_pitch) {
        const auto p = gait_params(amp_yaw, amp_pitch, frequency, phase_gradient, retrograde, bias_yaw, bias_pitch);
        return joint_tuple(gait::setpoint(index, t, p));
    }, py::arg("index"), py::arg("t"), py::arg("amp_yaw") = 0.0, py::arg("amp_pitch") = 0.0,
          py::arg("frequency") = 0.0, py::arg("phase_gradient") = 0.0, py::arg("retrograde") = false,
          py::arg("bias_yaw") = 0.0, py::arg("bias_pitch") = 0.0);
    m.def("encode_gait", [](double amp_yaw, double amp_pitch, double frequency, double phase_gradient,
                            bool retrograde, double bias_yaw, double bias_pitch) {
        const auto e = gait::encode_gait(
            gait_params(amp_yaw, amp_pitch, frequency, phase_gradient, retrograde, bias_yaw, bias_pitch));
        return py::make_tuple(py::bytes(reinterpret_cast<const char*>(e.payload.data()), e.payload.size()),
                              e.saturated);
    }, py::arg("amp_yaw") = 0.0, py::arg("amp_pitch") = 0.0, py::arg("frequency") = 0.0,
          py::arg("phase_gradient") = 0.0, py::arg("retrograde") = false, py::arg("bias_yaw") = 0.0,
          py::arg("bias_pitch") = 0.0);
    m.def("decode_gait", [](const py::bytes& payload) {
        const std::string s = payload;
        const std::vector<std::uint8_t> data(s.begin(), s.end());
        return gait_dict(gait::decode_gait(data));
    });

    // canbus
    m.def("frame_time", &canbus::frame_time, py::arg("dlc"), py::arg("bitrate") = canbus::kDefaultBitrate);
    m.def("arbitrate", [](const std::vector<std::tuple<int, int, double, int>>& frames, int stations, double bitrate) {
        canbus::Bus bus("bus", bitrate);
        for (int s = 0; s < stations; ++s) bus.attach(static_cast<canbus::NodeId>(s));
        for (const auto& [id, dlc, t, source] : frames) {
            const std::vector<std::uint8_t> data(static_cast<std::size_t>(std::max(dlc, 0)), 0);
            bus.submit(canbus::CanFrame::make(static_cast<std::uint16_t>(id), data, from_seconds(t),
                                              static_cast<canbus::NodeId>(source)));
        }
        py::list out;
        for (const auto& d : bus.arbitrate_and_deliver(std::numeric_limits<SimTime>::max() / 4))
            out.append(py::make_tuple(d.frame.id, d.frame.source, to_seconds(d.start_time), to_seconds(d.delivery_time)));
        return out;
    }, py::arg("frames"), py::arg("stations"), py::arg("bitrate") = canbus::kDefaultBitrate,
          "frames: (id, dlc, enqueue_time_s, source). Returns (id, source, start_s, delivered_s) in order.");

    // plant
    m.def("endurance_hours", [](double duty, std::size_t modules) {
        plant::EnergyBudget e;
        e.module_count = modules;
        return plant::endurance(e, duty);
    }, py::arg("duty") = 1.0, py::arg("module_count") = 7);
    m.def("buoyancy_report", [] {
        const auto r = plant::buoyancy_report(plant::MassBudget{}, kinematics::VertebraGeometry{});
        py::list rows;
        for (const auto& row : r.rows)
            rows.append(py::make_tuple(row.part, row.actual_mass, row.neutral_mass, row.net_buoyancy, row.density_ratio));
        py::dict d;
        d["vertebra_neutral_mass"] = r.vertebra_neutral_mass;
        d["rows"] = rows;
        d["total_net_buoyancy"] = r.total_net_buoyancy;
        return d;
    });
    m.def("propulsion_estimate", [](double amp_yaw, double frequency, double phase_gradient) {
        gait::GaitParams p;
        p.amp_yaw = amp_yaw;
        p.frequency = frequency;
        p.phase_gradient = phase_gradient;
        const auto e = plant::propulsion_estimate(p, gait::GaitShape{}, kinematics::BodyDimensions{},
                                                  plant::DragCoefficients{});
        py::dict d;
        d["mean_thrust_n"] = e.mean_thrust;
        d["mean_power_w"] = e.mean_power;
        d["non_normative"] = e.non_normative;
        return d;
    }, py::arg("amp_yaw"), py::arg("frequency"), py::arg("phase_gradient"));

    // simulation
    py::class_<sim::Scenario>(m, "Scenario")
        .def_static("load", &sim::Scenario::load, py::arg("path"))
        .def_static("parse", &parse_scenario, py::arg("text"))
        .def_readwrite("seed", &sim::Scenario::seed)
        .def_property_readonly("vertebra_count", [](const sim::Scenario& s) { return s.vertebra_count; })
        .def_property("duration_s", [](const sim::Scenario& s) { return to_seconds(s.duration); },
                      [](sim::Scenario& s, double v) { s.duration = from_seconds(v); })
        .def_property_readonly("command_count", [](const sim::Scenario& s) { return s.commands.size(); })
        .def("use_timeline", &sim::Scenario::use_timeline, py::arg("path"));
    m.def("scenario_defaults", &sim::scenario_defaults);

    m.def("run", [](const sim::Scenario& s, const std::filesystem::path& out_dir) {
        sim::RunMetrics metrics;
        {
            py::gil_scoped_release release;
            metrics = sim::run(s, out_dir);
        }
        return metrics_dict(metrics);
    }, py::arg("scenario"), py::arg("out_dir") = std::filesystem::path{});
    m.def("summarize", [](const std::filesystem::path& dir) { return sim::summarize(dir); }, py::arg("run_dir"));

    py::class_<sim::Simulation>(m, "Simulation")
        .def(py::init<sim::Scenario, std::filesystem::path>(), py::arg("scenario"),
             py::arg("out_dir") = std::filesystem::path{})
        .def("run_until", [](sim::Simulation& s, double t) { s.run_until(from_seconds(t)); }, py::arg("t"))
        .def("run", [](sim::Simulation& s) { return metrics_dict(s.run()); })
        .def("finish", [](sim::Simulation& s) { return metrics_dict(s.finish()); })
        .def_property_readonly("now", [](const sim::Simulation& s) { return to_seconds(s.now()); })
        .def("measured_joints", [](const sim::Simulation& s) {
            py::list out;
            for (const auto& j : s.measured_joints()) out.append(joint_tuple(j));
            return out;
        })
        .def("state_json", [](const sim::Simulation& s) { return teleop::state_frame(s.snapshot(), false).dump(); });

    // teleop
    py::class_<teleop::Session>(m, "Session")
        .def(py::init<sim::Scenario, std::filesystem::path>(), py::arg("scenario"),
             py::arg("record_dir") = std::filesystem::path{})
        .def("connect", [](teleop::Session& s, const std::string& c) { return std::string(teleop::to_string(s.connect(c))); })
        .def("disconnect", &teleop::Session::disconnect)
        .def_property_readonly("controller", &teleop::Session::controller)
        .def("submit_json", [](teleop::Session& s, const std::string& client, const std::string& message) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(message);
            } catch (const nlohmann::json::exception& e) {
                sim::Ack ack;
                ack.status = sim::AckStatus::rejected;
                ack.reason = std::string("malformed JSON: ") + e.what();
                return ack.to_json().dump();
            }
            return s.submit(client, j).to_json().dump();
        }, py::arg("client"), py::arg("message"))
        .def("advance", &teleop::Session::advance, py::arg("seconds"))
        .def_property_readonly("now", [](const teleop::Session& s) { return to_seconds(s.now()); })
        .def_property_readonly("paused", &teleop::Session::paused)
        .def("frame_json", [](const teleop::Session& s) { return s.frame().dump(); })
        .def("finish", &teleop::Session::finish);
}
