// SPDX-License-Identifier: Apache-2.0
#include "ristrack/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace ristrack
{
    using json = nlohmann::json;
    using ojson = nlohmann::ordered_json;

    namespace
    {
        class Block
        {
        public:
            Block(const json &j, std::string path) : j_(j), path_(std::move(path))
            {
                if (!j_.is_object())
                    throw ConfigError(path_, "expected an object");
            }

            const json *find(const std::string &key)
            {
                seen_.insert(key);
                auto it = j_.find(key);
                return it == j_.end() ? nullptr : &*it;
            }

            std::string at(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

            void number(const std::string &key, double &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_number())
                        throw ConfigError(at(key), "expected a number");
                    out = v->get<double>();
                }
            }

            void integer(const std::string &key, int &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_number_integer())
                        throw ConfigError(at(key), "expected an integer");
                    out = v->get<int>();
                }
            }

            void u64(const std::string &key, std::uint64_t &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
                        throw ConfigError(at(key), "expected a nonnegative integer");
                    out = v->get<std::uint64_t>();
                }
            }

            void boolean(const std::string &key, bool &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_boolean())
                        throw ConfigError(at(key), "expected true or false");
                    out = v->get<bool>();
                }
            }

            bool string(const std::string &key, std::string &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_string())
                        throw ConfigError(at(key), "expected a string");
                    out = v->get<std::string>();
                    return true;
                }
                return false;
            }

            static Vec3 to_vec3(const json &v, const std::string &path)
            {
                if (!v.is_array() || v.size() != 3)
                    throw ConfigError(path, "expected an array of 3 numbers");
                Vec3 out;
                for (int i = 0; i < 3; ++i)
                {
                    if (!v[static_cast<std::size_t>(i)].is_number())
                        throw ConfigError(path + "[" + std::to_string(i) + "]", "expected a number");
                    out[i] = v[static_cast<std::size_t>(i)].get<double>();
                }
                return out;
            }

            void vec3(const std::string &key, Vec3 &out)
            {
                if (const json *v = find(key))
                    out = to_vec3(*v, at(key));
            }

            void numbers(const std::string &key, std::vector<double> &out)
            {
                if (const json *v = find(key))
                {
                    if (!v->is_array())
                        throw ConfigError(at(key), "expected an array of numbers");
                    out.clear();
                    for (std::size_t i = 0; i < v->size(); ++i)
                    {
                        if (!(*v)[i].is_number())
                            throw ConfigError(at(key) + "[" + std::to_string(i) + "]", "expected a number");
                        out.push_back((*v)[i].get<double>());
                    }
                }
            }

            void finish() const
            {
                for (auto it = j_.begin(); it != j_.end(); ++it)
                    if (!seen_.count(it.key()))
                        throw ConfigError(at(it.key()), "unknown key");
            }

        private:
            const json &j_;
            std::string path_;
            std::set<std::string> seen_;
        };

        template <class E>
        E pick(const std::string &path, const std::string &value, std::initializer_list<std::pair<const char *, E>> options)
        {
            std::string allowed;
            for (const auto &[name, e] : options)
            {
                if (value == name)
                    return e;
                allowed += allowed.empty() ? name : std::string(" | ") + name;
            }
            throw ConfigError(path, "unknown value '" + value + "' (expected " + allowed + ")");
        }

        const char *to_string(BeamformerMode m)
        {
            switch (m)
            {
            case BeamformerMode::Matched:
                return "matched";
            case BeamformerMode::Uniform:
                return "uniform";
            default:
                return "multibeam";
            }
        }

        ojson vec_json(const Vec3 &v) { return ojson::array({v.x(), v.y(), v.z()}); }
    }

    Variant parse_variant(const std::string &name)
    {
        return pick<Variant>("variant", name,
                             {{"B1", Variant::B1}, {"B2", Variant::B2}, {"B3", Variant::B3}, {"proposed", Variant::Proposed}});
    }

    std::string to_string(Variant v)
    {
        switch (v)
        {
        case Variant::B1:
            return "B1";
        case Variant::B2:
            return "B2";
        case Variant::B3:
            return "B3";
        default:
            return "proposed";
        }
    }

    TrajectoryKind parse_trajectory(const std::string &name)
    {
        return pick<TrajectoryKind>("run.trajectory", name,
                                    {{"roam", TrajectoryKind::Roam},
                                     {"group", TrajectoryKind::Group},
                                     {"z_shape", TrajectoryKind::ZShape},
                                     {"static", TrajectoryKind::Static}});
    }

    std::string to_string(TrajectoryKind k)
    {
        switch (k)
        {
        case TrajectoryKind::Roam:
            return "roam";
        case TrajectoryKind::Group:
            return "group";
        case TrajectoryKind::ZShape:
            return "z_shape";
        default:
            return "static";
        }
    }

    ExperimentConfig parse_config(const std::string &json_text)
    {
        json root;
        try
        {
            root = json::parse(json_text);
        }
        catch (const json::parse_error &e)
        {
            throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
        }
        ExperimentConfig cfg;
        Block top(root, "");

        if (const json *v = top.find("schema_version"))
            if (!v->is_number_integer() || v->get<int>() != kSchemaVersion)
                throw ConfigError("schema_version", "unsupported schema version");

        if (const json *g = top.find("geometry"))
        {
            Block b(*g, "geometry");
            int num_ris = static_cast<int>(cfg.geom.num_ris());
            b.integer("num_ris", num_ris);
            b.integer("bs_antennas", cfg.geom.bs_antennas);
            b.integer("user_antennas", cfg.geom.user_antennas);
            b.integer("ris_nx", cfg.geom.ris_nx);
            b.integer("ris_ny", cfg.geom.ris_ny);
            if (num_ris < 1 || num_ris > 6)
                throw ConfigError("geometry.num_ris", "must be in 1..6 for the reference layout");
            const SystemGeometry ref = SystemGeometry::reference_layout(static_cast<std::size_t>(num_ris), cfg.geom.bs_antennas,
                                                                        cfg.geom.user_antennas, cfg.geom.ris_nx, cfg.geom.ris_ny);
            cfg.geom.ris = ref.ris;
            b.vec3("bs_pos", cfg.geom.bs_pos);
            b.vec3("bs_axis", cfg.geom.bs_axis);
            b.vec3("user_axis", cfg.geom.user_axis);
            if (const json *r = b.find("ris"))
            {
                if (!r->is_array() || r->empty())
                    throw ConfigError("geometry.ris", "expected a nonempty array");
                cfg.geom.ris.clear();
                for (std::size_t i = 0; i < r->size(); ++i)
                {
                    const std::string p = "geometry.ris[" + std::to_string(i) + "]";
                    Block rb((*r)[i], p);
                    RisPanel panel;
                    if (!rb.find("pos"))
                        throw ConfigError(p + ".pos", "required");
                    rb.vec3("pos", panel.pos);
                    rb.vec3("horizontal", panel.horizontal);
                    rb.vec3("vertical", panel.vertical);
                    rb.finish();
                    cfg.geom.ris.push_back(panel);
                }
            }
            b.finish();
        }

        if (const json *c = top.find("channel"))
        {
            Block b(*c, "channel");
            b.number("carrier_freq_hz", cfg.carrier_freq);
            b.number("noise_dbm", cfg.noise_dbm);
            b.numbers("snr_db", cfg.snr_db);
            std::string bf;
            if (b.string("beamformer", bf))
                cfg.beamformer = pick<BeamformerMode>("channel.beamformer", bf,
                                                      {{"multibeam", BeamformerMode::Multibeam},
                                                       {"matched", BeamformerMode::Matched},
                                                       {"uniform", BeamformerMode::Uniform}});
            b.boolean("noiseless", cfg.noiseless);
            b.finish();
        }

        if (const json *m = top.find("mrf"))
        {
            Block b(*m, "mrf");
            b.vec3("temporal_var", cfg.temporal_var);
            b.number("spatial_var", cfg.spatial_var);
            std::string fam;
            if (b.string("family", fam))
                cfg.family = pick<PotentialFamily>("mrf.family", fam, {{"l2", PotentialFamily::L2}, {"l1", PotentialFamily::L1}});
            b.number("box_half_width", cfg.box_half_width);
            b.finish();
        }

        if (const json *t = top.find("tracker"))
        {
            Block b(*t, "tracker");
            b.number("tol", cfg.tol);
            b.integer("max_iters", cfg.max_iters);
            b.number("damping", cfg.damping);
            b.integer("aoa_oversample", cfg.aoa_oversample);
            b.number("kappa_max", cfg.kappa_max);
            b.finish();
        }

        if (const json *p = top.find("pbf"))
        {
            Block b(*p, "pbf");
            std::string mode;
            if (b.string("mode", mode))
                cfg.pbf_mode = pick<PbfMode>("pbf.mode", mode, {{"random", PbfMode::Random}, {"adaptive", PbfMode::Adaptive}});
            b.integer("max_iters", cfg.pbf.max_iters);
            b.number("rel_tol", cfg.pbf.rel_tol);
            b.integer("randomizations", cfg.pbf.randomizations);
            b.integer("projection_iters", cfg.pbf.projection_iters);
            b.finish();
        }

        if (const json *r = top.find("run"))
        {
            Block b(*r, "run");
            b.integer("num_users", cfg.num_users);
            b.integer("horizon", cfg.horizon);
            b.integer("trials", cfg.trials);
            b.u64("seed", cfg.seed);
            std::string traj;
            if (b.string("trajectory", traj))
                cfg.trajectory = parse_trajectory(traj);
            b.number("speed", cfg.speed);
            b.boolean("speed_clamp", cfg.speed_clamp);
            b.boolean("planar", cfg.planar);
            b.vec3("start", cfg.start);
            b.vec3("end", cfg.end);
            b.number("user_spacing", cfg.user_spacing);
            b.vec3("area_center", cfg.area_center);
            if (const json *v = b.find("variants"))
            {
                if (!v->is_array() || v->empty())
                    throw ConfigError("run.variants", "expected a nonempty array");
                cfg.variants.clear();
                for (std::size_t i = 0; i < v->size(); ++i)
                {
                    const std::string p = "run.variants[" + std::to_string(i) + "]";
                    if (!(*v)[i].is_string())
                        throw ConfigError(p, "expected a string");
                    try
                    {
                        cfg.variants.push_back(parse_variant((*v)[i].get<std::string>()));
                    }
                    catch (const ConfigError &e)
                    {
                        throw ConfigError(p, e.what());
                    }
                }
            }
            b.integer("threads", cfg.threads);
            b.finish();
        }
        top.finish();
        cfg.validate();
        return cfg;
    }

    ExperimentConfig load_config(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("<file>", "cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse_config(ss.str());
    }

    void ExperimentConfig::validate() const
    {
        try
        {
            geom.validate();
        }
        catch (const std::exception &e)
        {
            throw ConfigError("geometry", e.what());
        }
        if (geom.user_antennas < static_cast<int>(geom.num_ris()) + 1)
            throw ConfigError("geometry.user_antennas", "must exceed the number of RIS");
        if (!(carrier_freq > 0))
            throw ConfigError("channel.carrier_freq_hz", "must be positive");
        if (snr_db.empty())
            throw ConfigError("channel.snr_db", "must be nonempty");
        if ((temporal_var.array() <= 0).any())
            throw ConfigError("mrf.temporal_var", "entries must be positive");
        if (!(spatial_var > 0))
            throw ConfigError("mrf.spatial_var", "must be positive");
        if (!(box_half_width > 0))
            throw ConfigError("mrf.box_half_width", "must be positive");
        if (!(tol > 0))
            throw ConfigError("tracker.tol", "must be positive");
        if (max_iters < 1)
            throw ConfigError("tracker.max_iters", "must be >= 1");
        if (!(damping > 0 && damping <= 1))
            throw ConfigError("tracker.damping", "must be in (0, 1]");
        if (aoa_oversample < 1)
            throw ConfigError("tracker.aoa_oversample", "must be >= 1");
        if (!(kappa_max > 0))
            throw ConfigError("tracker.kappa_max", "must be positive");
        if (pbf.max_iters < 0)
            throw ConfigError("pbf.max_iters", "must be >= 0");
        if (!(pbf.rel_tol > 0))
            throw ConfigError("pbf.rel_tol", "must be positive");
        if (pbf.randomizations < 0)
            throw ConfigError("pbf.randomizations", "must be >= 0");
        if (pbf.projection_iters < 1)
            throw ConfigError("pbf.projection_iters", "must be >= 1");
        if (num_users < 1)
            throw ConfigError("run.num_users", "must be >= 1");
        if (horizon < 1)
            throw ConfigError("run.horizon", "must be >= 1");
        if (trials < 1)
            throw ConfigError("run.trials", "must be >= 1");
        if (!(speed > 0))
            throw ConfigError("run.speed", "must be positive");
        if (!(user_spacing >= 0))
            throw ConfigError("run.user_spacing", "must be >= 0");
        if (trajectory == TrajectoryKind::ZShape && (end - start).head<2>().norm() == 0)
            throw ConfigError("run.end", "must differ from run.start for z_shape");
        if (variants.empty())
            throw ConfigError("run.variants", "must be nonempty");
        if (threads < 0)
            throw ConfigError("run.threads", "must be >= 0");
    }

    StMrfModel ExperimentConfig::mrf_model() const
    {
        return StMrfModel::chain(num_users, horizon, temporal_var, spatial_var, family);
    }

    ChannelParams ExperimentConfig::channel_params(double snr) const
    {
        ChannelParams p = ChannelParams::make(carrier_freq, noise_dbm, 1.0);
        p.tx_power = tx_power_for_snr(geom, p, snr, area_center);
        return p;
    }

    Scenario ExperimentConfig::scenario(double snr) const
    {
        Scenario sc;
        sc.geom = geom;
        sc.params = channel_params(snr);
        sc.bs_bf = bs_beamformer(geom, beamformer);
        return sc;
    }

    std::string config_to_json(const ExperimentConfig &cfg, int indent)
    {
        ojson j;
        j["schema_version"] = kSchemaVersion;
        ojson g;
        g["bs_pos"] = vec_json(cfg.geom.bs_pos);
        g["bs_axis"] = vec_json(cfg.geom.bs_axis);
        g["user_axis"] = vec_json(cfg.geom.user_axis);
        g["bs_antennas"] = cfg.geom.bs_antennas;
        g["user_antennas"] = cfg.geom.user_antennas;
        g["ris_nx"] = cfg.geom.ris_nx;
        g["ris_ny"] = cfg.geom.ris_ny;
        ojson ris = ojson::array();
        for (const auto &r : cfg.geom.ris)
        {
            ojson p;
            p["pos"] = vec_json(r.pos);
            p["horizontal"] = vec_json(r.horizontal);
            p["vertical"] = vec_json(r.vertical);
            ris.push_back(p);
        }
        g["ris"] = ris;
        j["geometry"] = g;

        ojson c;
        c["carrier_freq_hz"] = cfg.carrier_freq;
        c["noise_dbm"] = cfg.noise_dbm;
        c["snr_db"] = cfg.snr_db;
        c["beamformer"] = to_string(cfg.beamformer);
        c["noiseless"] = cfg.noiseless;
        j["channel"] = c;

        ojson m;
        m["temporal_var"] = vec_json(cfg.temporal_var);
        m["spatial_var"] = cfg.spatial_var;
        m["family"] = cfg.family == PotentialFamily::L2 ? "l2" : "l1";
        m["box_half_width"] = cfg.box_half_width;
        j["mrf"] = m;

        ojson t;
        t["tol"] = cfg.tol;
        t["max_iters"] = cfg.max_iters;
        t["damping"] = cfg.damping;
        t["aoa_oversample"] = cfg.aoa_oversample;
        t["kappa_max"] = cfg.kappa_max;
        j["tracker"] = t;

        ojson p;
        p["mode"] = cfg.pbf_mode == PbfMode::Adaptive ? "adaptive" : "random";
        p["max_iters"] = cfg.pbf.max_iters;
        p["rel_tol"] = cfg.pbf.rel_tol;
        p["randomizations"] = cfg.pbf.randomizations;
        p["projection_iters"] = cfg.pbf.projection_iters;
        j["pbf"] = p;

        ojson r;
        r["num_users"] = cfg.num_users;
        r["horizon"] = cfg.horizon;
        r["trials"] = cfg.trials;
        r["seed"] = cfg.seed;
        r["trajectory"] = to_string(cfg.trajectory);
        r["speed"] = cfg.speed;
        r["speed_clamp"] = cfg.speed_clamp;
        r["planar"] = cfg.planar;
        r["start"] = vec_json(cfg.start);
        r["end"] = vec_json(cfg.end);
        r["user_spacing"] = cfg.user_spacing;
        r["area_center"] = vec_json(cfg.area_center);
        ojson vars = ojson::array();
        for (Variant v : cfg.variants)
            vars.push_back(to_string(v));
        r["variants"] = vars;
        r["threads"] = cfg.threads;
        j["run"] = r;
        return j.dump(indent);
    }
}
