"""
weaver のテスト（合成パイプライン経由）
- 動機付けの例: 初期化は initializeLC に入り、LoginContext を return で運ぶ
- 同一ブロック / 既存フィールド / 新規フィールドの各チャネル
"""
import pytest

from minilang import emit_program, parse_sources
from synthesizer import synthesize
from weaver import MARKER, patchable_return, simple_name


@pytest.fixture(scope="module")
def woven01(task01, jaas_fspec):
    return synthesize(task01, jaas_fspec)


def _lines(result, path):
    return [line.strip() for line in result.files[path].splitlines()]


def test_motivating_example_snippets(woven01):
    lines = _lines(woven01, "JaasImplementor.mj")
    assert lines[17:21] == [
        f"{MARKER} #Initialization [cluster 1]",
        "javax.security.auth.callback.CallbackHandler ip_v1 = "
        "new com.sun.security.auth.callback.TextCallbackHandler();",
        "javax.security.auth.login.LoginContext ip_v2 = "
        "new javax.security.auth.login.LoginContext(name, ip_v1);",
        "return ip_v2;",
    ]
    assert lines[25:27] == [f"{MARKER} #Logging_In [cluster 2]", "lc.login();"]
    assert lines[31:34] == [
        f"{MARKER} #Subject_Inspection [cluster 3]",
        "javax.security.auth.Subject ip_v3 = lc.getSubject();",
        "java.util.Set ip_v4 = ip_v3.getPrincipals();",
    ]
    # main は変わらない
    assert "jaas.lc = jaas.initializeLC(jaas.moduleName);" in lines


def test_motivating_example_report(woven01):
    records = woven01.report.records()
    assert records[0] == "branch 1 rank=1"
    assert records[1:4] == [
        "placement 1 JaasImplementor.mj 19",
        "placement 2 JaasImplementor.mj 27",
        "placement 3 JaasImplementor.mj 33",
    ]
    assert records[4].startswith("score cas=") and "cds=1 cqs=1.0000" in records[4]
    assert "channel 1 2 returnValue" in records
    assert "channel 1 3 returnValue" in records
    assert records[-3:] == ["hole 1 name", "hole 2 lc", "hole 3 lc"]


def test_woven_output_reparses(woven01):
    again = parse_sources(woven01.files)
    assert emit_program(again) == woven01.files


def test_write(woven01, tmp_path):
    woven01.write(tmp_path)
    assert (tmp_path / "JaasImplementor.mj").read_text(encoding="utf-8") == woven01.files["JaasImplementor.mj"]
    assert (tmp_path / "report.rec").read_text(encoding="utf-8").startswith("branch 1 rank=1\n")
    assert "#Logging_In (cluster 2) -> JaasImplementor.mj:27" in (tmp_path / "report.txt").read_text(encoding="utf-8")


SOLO = """\
public class Solo {
    public static void main(String[] args) {
        String moduleName = "JaasSample";
        System.out.println(moduleName);
    }
}
"""


def test_same_block_uses_temp(jaas_fspec):
    result = synthesize(parse_sources({"Solo.mj": SOLO}), jaas_fspec)
    assert [c.mechanism for c in result.report.channels] == ["localTemp", "localTemp"]
    lines = _lines(result, "Solo.mj")
    assert "javax.security.auth.login.LoginContext ip_v2 = " \
           "new javax.security.auth.login.LoginContext(moduleName, ip_v1);" in lines
    assert "ip_v2.login();" in lines
    assert "javax.security.auth.Subject ip_v3 = ip_v2.getSubject();" in lines
    assert lines.index("ip_v2.login();") > lines.index(f"{MARKER} #Initialization [cluster 1]")


SHARED = """\
import javax.security.auth.login.LoginContext;

public class Shared {
    private LoginContext lc;
    private String moduleName = "JaasSample";

    public static void main(String[] args) {
        Shared app = new Shared();
        app.initialize();
        app.login();
        app.inspectSubject();
    }

    public void initialize() {
        System.out.println(moduleName);
    }

    public void login() {
        System.out.println("authenticating");
    }

    public void inspectSubject() {
        System.out.println("inspecting subject");
    }
}
"""


def test_existing_field_channel(jaas_fspec):
    result = synthesize(parse_sources({"Shared.mj": SHARED}), jaas_fspec)
    assert [c.mechanism for c in result.report.channels] == ["existingField", "existingField"]
    lines = _lines(result, "Shared.mj")
    assert lines.count("lc = ip_v2;") == 1
    assert "lc.login();" in lines
    assert "javax.security.auth.Subject ip_v3 = lc.getSubject();" in lines


def test_fresh_field_channel(jaas_fspec):
    source = SHARED.replace("    private LoginContext lc;\n", "")
    result = synthesize(parse_sources({"Shared.mj": source}), jaas_fspec)
    assert [c.mechanism for c in result.report.channels] == ["freshField", "freshField"]
    lines = _lines(result, "Shared.mj")
    assert "private javax.security.auth.login.LoginContext ip_LoginContext_1;" in lines
    assert lines.count("ip_LoginContext_1 = ip_v2;") == 1
    assert "ip_LoginContext_1.login();" in lines


def test_patchable_return(task01):
    assert patchable_return(task01, "JaasImplementor.initializeLC").index == 2
    assert patchable_return(task01, "JaasImplementor.login") is None


def test_simple_name():
    assert simple_name("javax.security.auth.login.LoginContext") == "LoginContext"
    assert simple_name("java.lang.String[]") == "StringArray"
