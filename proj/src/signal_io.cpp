// SPDX-License-Identifier: Apache-2.0
#include "ristrack/signal_io.hpp"

#include "ristrack/harness.hpp"
#include "ristrack/rng.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ristrack
{
    using json = nlohmann::ordered_json;

    namespace
    {
        json cvec_json(const CVec &v)
        {
            json re = json::array(), im = json::array();
            for (Eigen::Index i = 0; i < v.size(); ++i)
            {
                re.push_back(v[i].real());
                im.push_back(v[i].imag());
            }
            return json{{"re", re}, {"im", im}};
        }

        CVec cvec_from(const json &j)
        {
            const auto re = j.at("re").get<std::vector<double>>();
            const auto im = j.at("im").get<std::vector<double>>();
            if (re.size() != im.size())
                throw InvalidSize("signal file: re/im length mismatch");
            CVec v(static_cast<Eigen::Index>(re.size()));
            for (std::size_t i = 0; i < re.size(); ++i)
                v[static_cast<Eigen::Index>(i)] = cd(re[i], im[i]);
            return v;
        }

        json phase_json(const CVec &p)
        {
            json a = json::array();
            for (Eigen::Index i = 0; i < p.size(); ++i)
                a.push_back(std::arg(p[i]));
            return a;
        }

        CVec phase_from(const json &j)
        {
            const auto a = j.get<std::vector<double>>();
            CVec p(static_cast<Eigen::Index>(a.size()));
            for (std::size_t i = 0; i < a.size(); ++i)
                p[static_cast<Eigen::Index>(i)] = std::polar(1.0, a[i]);
            return p;
        }
    }

    SignalRecord simulate_signals(const ExperimentConfig &cfg, std::size_t snr_index, int trial)
    {
        SignalRecord rec;
        const std::uint64_t seed = trial_seed(cfg, trial);
        const Scenario sc = cfg.scenario(cfg.snr_db.at(snr_index));
        rec.snr_db = cfg.snr_db[snr_index];
        rec.noise_power = sc.params.noise_power;
        rec.truth = generate_truth(cfg, seed);
        SimulatedSource src(sc, rec.truth, seed, cfg.noiseless);
        for (int t = 0; t < cfg.horizon; ++t)
        {
            rec.phases.push_back(random_phase_set(sc.geom, derive_seed(seed, {stream::kPhases, static_cast<std::uint64_t>(t)})));
            std::vector<CVec> ys;
            for (int u = 0; u < cfg.num_users; ++u)
                ys.push_back(src.signal(u, t, rec.phases.back()));
            rec.y.push_back(std::move(ys));
        }
        return rec;
    }

    void write_signals(const std::string &path, const SignalRecord &rec)
    {
        json j;
        j["snr_db"] = rec.snr_db;
        j["noise_power"] = rec.noise_power;
        j["users"] = rec.truth.users();
        j["slots"] = rec.truth.slots();
        json truth = json::array();
        for (int u = 0; u < rec.truth.users(); ++u)
        {
            json row = json::array();
            for (int t = 0; t < rec.truth.slots(); ++t)
            {
                const Vec3 &p = rec.truth.at(u, t);
                row.push_back({p.x(), p.y(), p.z()});
            }
            truth.push_back(row);
        }
        j["truth"] = truth;
        json slots = json::array();
        for (std::size_t t = 0; t < rec.y.size(); ++t)
        {
            json s;
            json ph = json::array();
            for (const CVec &p : rec.phases[t])
                ph.push_back(phase_json(p));
            s["phases_rad"] = ph;
            json ys = json::array();
            for (const CVec &y : rec.y[t])
                ys.push_back(cvec_json(y));
            s["y"] = ys;
            slots.push_back(s);
        }
        j["signals"] = slots;
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path);
        f << j.dump(1) << '\n';
    }

    SignalRecord read_signals(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        const json j = json::parse(ss.str());
        SignalRecord rec;
        rec.snr_db = j.at("snr_db").get<double>();
        rec.noise_power = j.at("noise_power").get<double>();
        const int users = j.at("users").get<int>();
        const int slots = j.at("slots").get<int>();
        rec.truth = Trajectory(users, slots);
        for (int u = 0; u < users; ++u)
            for (int t = 0; t < slots; ++t)
            {
                const auto p = j.at("truth").at(static_cast<std::size_t>(u)).at(static_cast<std::size_t>(t)).get<std::vector<double>>();
                rec.truth.at(u, t) = Vec3(p.at(0), p.at(1), p.at(2));
            }
        for (const auto &s : j.at("signals"))
        {
            std::vector<CVec> ph, ys;
            for (const auto &p : s.at("phases_rad"))
                ph.push_back(phase_from(p));
            for (const auto &y : s.at("y"))
                ys.push_back(cvec_from(y));
            if (static_cast<int>(ys.size()) != users)
                throw InvalidSize("signal file: one y per user per slot");
            rec.phases.push_back(std::move(ph));
            rec.y.push_back(std::move(ys));
        }
        if (static_cast<int>(rec.y.size()) != slots)
            throw InvalidSize("signal file: slot count mismatch");
        return rec;
    }

    CVec StoredSource::signal(int user, int slot, std::span<const CVec> /*phases*/)
    {
        return rec_.y.at(static_cast<std::size_t>(slot)).at(static_cast<std::size_t>(user));
    }
}
