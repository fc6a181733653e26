#include "cbve/config.hpp"

#include "cbve/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace cbve
{
namespace
{

using json = nlohmann::json;

const char* const measure_keys[2][2] = {{"b11", "b12"}, {"b21", "b22"}};
const char* const gamma_keys[2][2] = {{"gamma11", "gamma12"}, {"gamma21", "gamma22"}};

[[noreturn]] void fail(const std::string& path, const std::string& what)
{
    throw ConfigError(path + ": " + what);
}

std::string at_index(const std::string& path, std::size_t k)
{
    return path + "[" + std::to_string(k) + "]";
}

const json& require_array(const json& j, const std::string& path, std::optional<std::size_t> size = {})
{
    if (!j.is_array())
        fail(path, "expected an array");
    if (size && j.size() != *size)
        fail(path, "expected " + std::to_string(*size) + " entries, found " + std::to_string(j.size()));
    return j;
}

double number(const json& j, const std::string& path)
{
    if (!j.is_number())
        fail(path, "expected a number");
    const double x = j.get<double>();
    if (!std::isfinite(x))
        fail(path, "expected a finite number");
    return x;
}

std::size_t count(const json& j, const std::string& path)
{
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        fail(path, "expected a nonnegative integer");
    return j.get<std::size_t>();
}

Pair pair(const json& j, const std::string& path)
{
    require_array(j, path, 2);
    return {number(j[0], at_index(path, 0)), number(j[1], at_index(path, 1))};
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed)
{
    if (!obj.is_object())
        fail(path.empty() ? "config" : path, "expected an object");
    for (const auto& [key, value] : obj.items())
    {
        if (!allowed.count(key))
            fail(path.empty() ? key : path + "." + key, "unknown key");
    }
}

// Wraps construction errors of the data model with the field path.
template <class F>
auto guarded(const std::string& path, F&& make)
{
    try
    {
        return make();
    }
    catch (const ConfigError&)
    {
        throw;
    }
    catch (const Error& e)
    {
        fail(path, e.what());
    }
}

StieltjesMeasure parse_measure(const json& root, const std::string& key, double horizon, bool monotone, bool allow_atoms)
{
    if (!root.contains(key))
    {
        return StieltjesMeasure(horizon, {}, {}, monotone ? Monotonicity::nondecreasing : Monotonicity::none);
    }
    const json& obj = root.at(key);
    if (allow_atoms)
        check_keys(obj, key, {"density", "atoms"});
    else
        check_keys(obj, key, {"density"});

    std::vector<DensityPiece> pieces;
    if (obj.contains("density"))
    {
        const std::string path = key + ".density";
        const auto& arr = require_array(obj.at("density"), path);
        for (std::size_t k = 0; k < arr.size(); ++k)
        {
            const std::string p = at_index(path, k);
            require_array(arr[k], p, 3);
            const DensityPiece piece{
                number(arr[k][0], at_index(p, 0)), number(arr[k][1], at_index(p, 1)), number(arr[k][2], at_index(p, 2))};
            guarded(p, [&] { return StieltjesMeasure(horizon, {piece}, {}); });
            pieces.push_back(piece);
        }
    }
    std::vector<Atom> atoms;
    if (obj.contains("atoms"))
    {
        const std::string path = key + ".atoms";
        const auto& arr = require_array(obj.at("atoms"), path);
        for (std::size_t k = 0; k < arr.size(); ++k)
        {
            const std::string p = at_index(path, k);
            require_array(arr[k], p, 2);
            const Atom atom{number(arr[k][0], at_index(p, 0)), number(arr[k][1], at_index(p, 1))};
            guarded(p, [&] { return StieltjesMeasure(horizon, {}, {atom}); });
            atoms.push_back(atom);
        }
    }
    auto m = guarded(key, [&] { return StieltjesMeasure(horizon, pieces, atoms); });
    // Sign violations of the nondecreasing coefficients are reported by validation.
    if (monotone && m.is_nonnegative())
        m = m.with_monotonicity(Monotonicity::nondecreasing);
    return m;
}

DiscreteSpatialMeasure parse_points(const json& j, const std::string& path)
{
    require_array(j, path);
    std::vector<SpatialPoint> pts;
    for (std::size_t k = 0; k < j.size(); ++k)
    {
        const std::string p = at_index(path, k);
        require_array(j[k], p, 3);
        const SpatialPoint sp{number(j[k][0], at_index(p, 0)), number(j[k][1], at_index(p, 1)), number(j[k][2], at_index(p, 2))};
        guarded(p, [&] { return DiscreteSpatialMeasure({sp}); });
        pts.push_back(sp);
    }
    return guarded(path, [&] { return DiscreteSpatialMeasure(pts); });
}

JumpMeasure parse_jumps(const json& root, const std::string& key, double horizon)
{
    if (!root.contains(key))
        return JumpMeasure(horizon);
    const json& obj = root.at(key);
    check_keys(obj, key, {"kernel", "atoms"});

    std::vector<KernelPiece> kernel;
    if (obj.contains("kernel"))
    {
        const std::string path = key + ".kernel";
        const auto& arr = require_array(obj.at("kernel"), path);
        for (std::size_t k = 0; k < arr.size(); ++k)
        {
            const std::string p = at_index(path, k);
            require_array(arr[k], p, 3);
            KernelPiece piece{number(arr[k][0], at_index(p, 0)),
                              number(arr[k][1], at_index(p, 1)),
                              parse_points(arr[k][2], at_index(p, 2))};
            guarded(p, [&] { return JumpMeasure(horizon, {piece}, {}); });
            kernel.push_back(std::move(piece));
        }
    }
    std::vector<JumpAtom> atoms;
    if (obj.contains("atoms"))
    {
        const std::string path = key + ".atoms";
        const auto& arr = require_array(obj.at("atoms"), path);
        for (std::size_t k = 0; k < arr.size(); ++k)
        {
            const std::string p = at_index(path, k);
            require_array(arr[k], p, 2);
            JumpAtom atom{number(arr[k][0], at_index(p, 0)), parse_points(arr[k][1], at_index(p, 1))};
            guarded(p, [&] { return JumpMeasure(horizon, {}, {atom}); });
            atoms.push_back(std::move(atom));
        }
    }
    return guarded(key, [&] { return JumpMeasure(horizon, kernel, atoms); });
}

RunParams parse_run(const json& root)
{
    RunParams run;
    if (!root.contains("run"))
        return run;
    const json& obj = root.at("run");
    check_keys(obj, "run", {"t", "lambda", "x0", "paths", "seed", "refine"});
    if (obj.contains("t"))
        run.t = number(obj.at("t"), "run.t");
    if (obj.contains("lambda"))
        run.lambda = pair(obj.at("lambda"), "run.lambda");
    if (obj.contains("x0"))
        run.x0 = pair(obj.at("x0"), "run.x0");
    if (obj.contains("paths"))
        run.paths = count(obj.at("paths"), "run.paths");
    if (obj.contains("seed"))
        run.seed = count(obj.at("seed"), "run.seed");
    if (obj.contains("refine"))
        run.refine = count(obj.at("refine"), "run.refine");
    return run;
}

json emit_measure(const StieltjesMeasure& m, bool with_atoms)
{
    json obj = json::object();
    json density = json::array();
    for (const auto& p : m.pieces())
        density.push_back({p.t0, p.t1, p.value});
    obj["density"] = density;
    if (with_atoms)
    {
        json atoms = json::array();
        for (const auto& a : m.atoms())
            atoms.push_back({a.time, a.mass});
        obj["atoms"] = atoms;
    }
    return obj;
}

json emit_points(const DiscreteSpatialMeasure& m)
{
    json arr = json::array();
    for (const auto& p : m.points())
        arr.push_back({p.z1, p.z2, p.weight});
    return arr;
}

json emit_jumps(const JumpMeasure& m)
{
    json kernel = json::array();
    for (const auto& piece : m.kernel())
        kernel.push_back({piece.t0, piece.t1, emit_points(piece.rate)});
    json atoms = json::array();
    for (const auto& atom : m.atoms())
        atoms.push_back({atom.time, emit_points(atom.mass)});
    return json{{"kernel", kernel}, {"atoms", atoms}};
}

std::string line_and_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k)
    {
        if (text[k] == '\n')
        {
            ++line;
            col = 1;
        }
        else
            ++col;
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace

RunConfig parse_config(const std::string& text)
{
    json root;
    try
    {
        root = json::parse(text);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError("syntax error at " + line_and_column(text, e.byte) + ": " + e.what());
    }

    check_keys(root,
               "",
               {"horizon", "grid_cells", "form", "b11", "b12", "b21", "b22", "c1", "c2", "m1", "m2", "gamma11",
                "gamma12", "gamma21", "gamma22", "mu1", "mu2", "run"});
    if (!root.contains("horizon"))
        fail("horizon", "missing");
    if (!root.contains("grid_cells"))
        fail("grid_cells", "missing");

    RunConfig cfg;
    cfg.horizon = number(root.at("horizon"), "horizon");
    if (!(cfg.horizon > 0))
        fail("horizon", "must be positive");
    cfg.grid_cells = count(root.at("grid_cells"), "grid_cells");
    if (cfg.grid_cells < 1)
        fail("grid_cells", "must be at least 1");

    std::string form = "general";
    if (root.contains("form"))
    {
        if (!root.at("form").is_string())
            fail("form", "expected \"general\" or \"special\"");
        form = root.at("form").get<std::string>();
        if (form != "general" && form != "special")
            fail("form", "expected \"general\" or \"special\", found \"" + form + "\"");
    }
    cfg.special = form == "special";

    const std::set<std::string> general_only{"b11", "b12", "b21", "b22", "c1", "c2", "m1", "m2"};
    const std::set<std::string> special_only{"gamma11", "gamma12", "gamma21", "gamma22", "mu1", "mu2"};
    for (const auto& key : cfg.special ? general_only : special_only)
        if (root.contains(key))
            fail(key, "not allowed for form \"" + form + "\"");

    const double T = cfg.horizon;
    const TimeGrid base = TimeGrid::uniform(T, cfg.grid_cells);
    if (cfg.special)
    {
        SpecialForm sf = SpecialForm::zero(T, cfg.grid_cells);
        for (std::size_t i = 0; i < 2; ++i)
        {
            for (std::size_t j = 0; j < 2; ++j)
                sf.gamma[i][j] = parse_measure(root, gamma_keys[i][j], T, i != j, true);
            sf.mu[i] = parse_jumps(root, i == 0 ? "mu1" : "mu2", T);
        }
        sf.grid = aligned_grid(base, sf);
        cfg.sf = std::move(sf);
        cfg.env = Environment::zero(T, cfg.grid_cells);
    }
    else
    {
        Environment env = Environment::zero(T, cfg.grid_cells);
        for (std::size_t i = 0; i < 2; ++i)
        {
            for (std::size_t j = 0; j < 2; ++j)
                env.b[i][j] = parse_measure(root, measure_keys[i][j], T, i != j, true);
            env.c[i] = parse_measure(root, i == 0 ? "c1" : "c2", T, true, false);
            env.m[i] = parse_jumps(root, i == 0 ? "m1" : "m2", T);
        }
        env.grid = aligned_grid(base, env);
        cfg.env = std::move(env);
        cfg.sf = SpecialForm::zero(T, cfg.grid_cells);
    }
    cfg.run = parse_run(root);
    return cfg;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config(os.str());
}

std::string emit_config(const RunConfig& cfg)
{
    json root = json::object();
    root["horizon"] = cfg.horizon;
    root["grid_cells"] = cfg.grid_cells;
    root["form"] = cfg.special ? "special" : "general";
    for (std::size_t i = 0; i < 2; ++i)
    {
        for (std::size_t j = 0; j < 2; ++j)
        {
            if (cfg.special)
                root[gamma_keys[i][j]] = emit_measure(cfg.sf.gamma[i][j], true);
            else
                root[measure_keys[i][j]] = emit_measure(cfg.env.b[i][j], true);
        }
        if (cfg.special)
        {
            root[i == 0 ? "mu1" : "mu2"] = emit_jumps(cfg.sf.mu[i]);
        }
        else
        {
            root[i == 0 ? "c1" : "c2"] = emit_measure(cfg.env.c[i], false);
            root[i == 0 ? "m1" : "m2"] = emit_jumps(cfg.env.m[i]);
        }
    }
    json run = json::object();
    if (cfg.run.t)
        run["t"] = *cfg.run.t;
    if (cfg.run.lambda)
        run["lambda"] = {(*cfg.run.lambda)[0], (*cfg.run.lambda)[1]};
    if (cfg.run.x0)
        run["x0"] = {(*cfg.run.x0)[0], (*cfg.run.x0)[1]};
    if (cfg.run.paths)
        run["paths"] = *cfg.run.paths;
    if (cfg.run.seed)
        run["seed"] = *cfg.run.seed;
    if (cfg.run.refine)
        run["refine"] = *cfg.run.refine;
    if (!run.empty())
        root["run"] = run;
    return root.dump(2) + "\n";
}

RunConfig make_config(const Environment& env, std::size_t grid_cells)
{
    RunConfig cfg;
    cfg.horizon = env.horizon();
    cfg.grid_cells = grid_cells;
    cfg.env = env.with_grid(aligned_grid(TimeGrid::uniform(env.horizon(), grid_cells), env));
    cfg.sf = SpecialForm::zero(env.horizon(), grid_cells);
    return cfg;
}

RunConfig make_config(const SpecialForm& sf, std::size_t grid_cells)
{
    RunConfig cfg;
    cfg.horizon = sf.horizon();
    cfg.grid_cells = grid_cells;
    cfg.special = true;
    cfg.sf = sf.with_grid(aligned_grid(TimeGrid::uniform(sf.horizon(), grid_cells), sf));
    cfg.env = Environment::zero(sf.horizon(), grid_cells);
    return cfg;
}

} // namespace cbve
